#include "labelgcn/graph_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string_view>
#include <unordered_map>

#include "labelgcn/error.hpp"
#include "labelgcn/random.hpp"

namespace labelgcn {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Calls fn(line_number, line) for every non-blank line; strips a trailing CR.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        if (line.find_first_not_of(" \t") != std::string_view::npos) fn(line_no, line);
        pos = end + 1;
    }
}

std::vector<std::string_view> split(std::string_view line, std::string_view delims) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    const bool collapse = delims.find(',') == std::string_view::npos;
    while (pos <= line.size()) {
        std::size_t end = line.find_first_of(delims, pos);
        if (end == std::string_view::npos) end = line.size();
        if (!collapse || end > pos) out.push_back(line.substr(pos, end - pos));
        pos = end + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '"')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

[[noreturn]] void fail_line(const std::filesystem::path& path, std::size_t line_no, const std::string& what) {
    throw DataError(path.filename().string() + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

NodeSet GraphDataset::labeled_nodes() const {
    NodeSet out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i]) out.push_back(i);
    }
    return out;
}

void GraphDataset::validate() const {
    const std::size_t nodes = n();
    if (labels.size() != nodes) throw DataError(name + ": label count differs from feature rows");
    if (!node_ids.empty() && node_ids.size() != nodes) throw DataError(name + ": id count differs from feature rows");
    if (n_classes() == 0) throw DataError(name + ": no classes");
    for (const auto& l : labels) {
        if (l && *l >= n_classes()) throw DataError(name + ": label outside class range");
    }
    if (!time_step.empty() && time_step.size() != nodes) {
        throw DataError(name + ": time steps must be present for all nodes or none");
    }
    if (label_encoding == LabelEncoding::scalar_map && class_scalars.size() != n_classes()) {
        throw DataError(name + ": scalar label map needs one value per class");
    }
    for (const auto& [u, v] : edges) {
        if (u >= nodes || v >= nodes) throw DataError(name + ": edge endpoint out of range");
    }
    if (!features.all_finite()) throw DataError(name + ": non-finite feature value");
}

GraphDataset load_citation(const std::filesystem::path& content_path, const std::filesystem::path& cites_path,
                           std::string name) {
    const std::string content = read_file(content_path);

    std::vector<std::string> ids;
    std::vector<std::string> class_of;
    std::vector<double> feats;
    std::size_t d = 0;
    std::unordered_map<std::string, std::size_t> index;

    for_each_line(content, [&](std::size_t line_no, std::string_view line) {
        const auto tok = split(line, " \t");
        if (tok.size() < 2) fail_line(content_path, line_no, "expected id, features and class");
        const std::size_t width = tok.size() - 2;
        if (ids.empty()) {
            d = width;
        } else if (width != d) {
            fail_line(content_path, line_no,
                      "expected " + std::to_string(d) + " features, found " + std::to_string(width));
        }
        std::string id(tok.front());
        if (!index.emplace(id, ids.size()).second) fail_line(content_path, line_no, "duplicate node id '" + id + "'");
        for (std::size_t k = 1; k + 1 < tok.size(); ++k) {
            const auto v = parse_double(tok[k]);
            if (!v) fail_line(content_path, line_no, "bad feature value '" + std::string(tok[k]) + "'");
            feats.push_back(*v);
        }
        ids.push_back(std::move(id));
        class_of.emplace_back(tok.back());
    });
    if (ids.empty()) throw DataError(content_path.string() + ": no nodes");

    GraphDataset ds;
    ds.name = std::move(name);
    ds.features = DenseMatrix(ids.size(), d, std::move(feats));
    const std::set<std::string> names(class_of.begin(), class_of.end());
    ds.class_names.assign(names.begin(), names.end());
    std::map<std::string, std::size_t> class_index;
    for (std::size_t k = 0; k < ds.class_names.size(); ++k) class_index[ds.class_names[k]] = k;
    ds.labels.reserve(ids.size());
    for (const auto& c : class_of) ds.labels.emplace_back(class_index.at(c));

    const std::string cites = read_file(cites_path);
    for_each_line(cites, [&](std::size_t line_no, std::string_view line) {
        const auto tok = split(line, " \t");
        if (tok.size() != 2) fail_line(cites_path, line_no, "expected two node ids");
        const auto a = index.find(std::string(tok[0]));
        const auto b = index.find(std::string(tok[1]));
        if (a == index.end() || b == index.end()) {
            ++ds.dropped_edges;
            return;
        }
        ds.edges.emplace_back(a->second, b->second);
    });
    ds.node_ids = std::move(ids);
    ds.validate();
    return ds;
}

GraphDataset load_elliptic(const std::filesystem::path& features_csv, const std::filesystem::path& classes_csv,
                           const std::filesystem::path& edgelist_csv) {
    GraphDataset ds;
    ds.name = "elliptic";
    ds.label_encoding = LabelEncoding::scalar_map;
    ds.class_names = {"licit", "illicit"};
    ds.class_scalars = {-1.0, 1.0};
    ds.positive_class = 1;

    std::unordered_map<std::string, std::size_t> index;
    std::vector<double> feats;
    std::size_t d = 0;
    const std::string features = read_file(features_csv);
    for_each_line(features, [&](std::size_t line_no, std::string_view line) {
        const auto tok = split(line, ",");
        if (tok.size() < 2) fail_line(features_csv, line_no, "expected tx id and time step");
        const std::size_t width = tok.size() - 1;  // time step + features
        if (ds.node_ids.empty()) {
            d = width;
        } else if (width != d) {
            fail_line(features_csv, line_no, "inconsistent column count");
        }
        std::string id(trim(tok[0]));
        if (!index.emplace(id, ds.node_ids.size()).second) fail_line(features_csv, line_no, "duplicate tx id " + id);
        const auto step = parse_double(tok[1]);
        if (!step || *step != std::floor(*step) || *step < 1) fail_line(features_csv, line_no, "bad time step");
        ds.time_step.push_back(static_cast<int>(*step));
        for (std::size_t k = 1; k < tok.size(); ++k) {
            const auto v = parse_double(tok[k]);
            if (!v) fail_line(features_csv, line_no, "bad feature value");
            feats.push_back(*v);
        }
        ds.node_ids.push_back(std::move(id));
    });
    if (ds.node_ids.empty()) throw DataError(features_csv.string() + ": no rows");
    ds.features = DenseMatrix(ds.node_ids.size(), d, std::move(feats));
    ds.labels.assign(ds.node_ids.size(), std::nullopt);

    std::vector<char> seen(ds.node_ids.size(), 0);
    std::size_t class_rows = 0;
    const std::string classes = read_file(classes_csv);
    for_each_line(classes, [&](std::size_t line_no, std::string_view line) {
        const auto tok = split(line, ",");
        if (tok.size() != 2) fail_line(classes_csv, line_no, "expected txId,class");
        const std::string_view id = trim(tok[0]);
        const std::string_view cls = trim(tok[1]);
        if (line_no == 1 && cls == "class") return;
        const auto it = index.find(std::string(id));
        if (it == index.end()) fail_line(classes_csv, line_no, "unknown tx id " + std::string(id));
        if (seen[it->second]) fail_line(classes_csv, line_no, "duplicate tx id " + std::string(id));
        seen[it->second] = 1;
        ++class_rows;
        if (cls == "1") {
            ds.labels[it->second] = 1;
        } else if (cls == "2") {
            ds.labels[it->second] = 0;
        } else if (cls != "unknown") {
            fail_line(classes_csv, line_no, "unknown class '" + std::string(cls) + "'");
        }
    });
    if (class_rows != ds.node_ids.size()) {
        throw DataError("elliptic: " + std::to_string(class_rows) + " class rows for " +
                        std::to_string(ds.node_ids.size()) + " feature rows");
    }

    const std::string edges = read_file(edgelist_csv);
    for_each_line(edges, [&](std::size_t line_no, std::string_view line) {
        const auto tok = split(line, ",");
        if (tok.size() != 2) fail_line(edgelist_csv, line_no, "expected txId1,txId2");
        if (line_no == 1 && trim(tok[0]) == "txId1") return;
        const auto a = index.find(std::string(trim(tok[0])));
        const auto b = index.find(std::string(trim(tok[1])));
        if (a == index.end() || b == index.end()) {
            ++ds.dropped_edges;
            return;
        }
        ds.edges.emplace_back(a->second, b->second);
    });
    ds.validate();
    return ds;
}

SplitSpec sample_split(const GraphDataset& ds, const SplitSizes& sizes, std::uint64_t seed) {
    NodeSet pool = ds.labeled_nodes();
    if (sizes.total() > pool.size()) {
        throw DataError("split needs " + std::to_string(sizes.total()) + " labeled nodes, dataset has " +
                        std::to_string(pool.size()));
    }
    Rng rng(derive_seed(seed, {0x5b1u}));
    rng.shuffle(std::span<std::size_t>(pool));
    SplitSpec split;
    auto take = [&, pos = std::size_t{0}](std::size_t count) mutable {
        NodeSet out(pool.begin() + static_cast<std::ptrdiff_t>(pos),
                    pool.begin() + static_cast<std::ptrdiff_t>(pos + count));
        pos += count;
        std::sort(out.begin(), out.end());
        return out;
    };
    split.train = take(sizes.train);
    split.validation = take(sizes.validation);
    split.test = take(sizes.test);
    split.support = take(sizes.support);
    return split;
}

bool LabelVisibility::contains(std::size_t node) const {
    return std::binary_search(visible.begin(), visible.end(), node);
}

LabelVisibility visibility_for_phase(const SplitSpec& split, Phase phase, double support_fraction,
                                     std::uint64_t seed) {
    if (!(support_fraction >= 0.0 && support_fraction <= 1.0)) {
        throw std::invalid_argument("support fraction must lie in [0, 1]");
    }
    LabelVisibility vis;
    vis.visible = split.train;
    vis.visible.insert(vis.visible.end(), split.validation.begin(), split.validation.end());
    if (phase == Phase::inference) {
        NodeSet order = split.support;
        Rng rng(derive_seed(seed, {0x5a9u}));
        rng.shuffle(std::span<std::size_t>(order));
        const auto count = static_cast<std::size_t>(std::llround(support_fraction * static_cast<double>(order.size())));
        vis.visible.insert(vis.visible.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
    }
    std::sort(vis.visible.begin(), vis.visible.end());
    vis.visible.erase(std::unique(vis.visible.begin(), vis.visible.end()), vis.visible.end());
    for (std::size_t t : split.test) {
        if (vis.contains(t)) throw DataError("split is not disjoint: test node would be visible");
    }
    return vis;
}

InputMatrix build_input(const GraphDataset& ds, const LabelVisibility& vis) {
    const std::size_t n = ds.n();
    const std::size_t d = ds.d();
    const std::size_t k = ds.label_columns();
    InputMatrix in{DenseMatrix(n, d + k), LabelColumnMask::trailing(d + k, k)};
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(ds.features.row(i).begin(), d, in.x.row(i).begin());
    }
    for (std::size_t node : vis.visible) {
        if (node >= n) throw DimensionError("visibility names a node outside the dataset");
        const auto& label = ds.labels[node];
        if (!label) continue;
        if (ds.label_encoding == LabelEncoding::one_hot) {
            in.x(node, d + *label) = 1.0;
        } else {
            in.x(node, d) = ds.class_scalars[*label];
        }
    }
    return in;
}

InputMatrix build_feature_input(const GraphDataset& ds) { return InputMatrix{ds.features, LabelColumnMask{}}; }

void row_normalize_features(GraphDataset& ds) {
    for (std::size_t i = 0; i < ds.n(); ++i) {
        auto r = ds.features.row(i);
        double sum = 0.0;
        for (double v : r) sum += v;
        if (sum == 0.0) continue;
        for (double& v : r) v /= sum;
    }
}

GraphDataset induced_subgraph(const GraphDataset& ds, const NodeSet& nodes) {
    GraphDataset sub;
    sub.name = ds.name;
    sub.class_names = ds.class_names;
    sub.label_encoding = ds.label_encoding;
    sub.class_scalars = ds.class_scalars;
    sub.positive_class = ds.positive_class;
    sub.features = ds.features.gather_rows(nodes);

    constexpr std::size_t absent = static_cast<std::size_t>(-1);
    std::vector<std::size_t> remap(ds.n(), absent);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (remap[nodes[k]] != absent) throw DataError("induced_subgraph: repeated node");
        remap[nodes[k]] = k;
        sub.labels.push_back(ds.labels[nodes[k]]);
        if (!ds.node_ids.empty()) sub.node_ids.push_back(ds.node_ids[nodes[k]]);
        if (ds.has_time_steps()) sub.time_step.push_back(ds.time_step[nodes[k]]);
    }
    for (const auto& [u, v] : ds.edges) {
        if (remap[u] != absent && remap[v] != absent) sub.edges.emplace_back(remap[u], remap[v]);
    }
    return sub;
}

}  // namespace labelgcn
