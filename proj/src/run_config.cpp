#include "labelgcn/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "labelgcn/error.hpp"

#ifndef LABELGCN_VERSION
#define LABELGCN_VERSION "unknown"
#endif

namespace labelgcn {

namespace {

std::string_view strip(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

const std::vector<ConfigKey> kDataKeys{
    {"dataset", "cora, citeseer, pubmed, elliptic, or any name with explicit paths"},
    {"data_dir", "directory holding <dataset>/ subdirectories (default $LABELGCN_DATA_DIR or ./data)"},
    {"content", "citation .content file"},
    {"cites", "citation .cites file"},
    {"features_csv", "Elliptic features CSV"},
    {"classes_csv", "Elliptic classes CSV"},
    {"edgelist_csv", "Elliptic edge list CSV"},
    {"normalize_features", "divide every feature row by its sum", true},
};
const std::vector<ConfigKey> kModelKeys{
    {"hidden", "hidden units per graph convolution"},
    {"dropout", "dropout rate after each convolution"},
    {"lr", "Adam learning rate"},
    {"epochs", "maximum number of epochs"},
    {"patience", "early-stopping patience on validation loss, 0 to disable"},
    {"oversample", "weight of positive-class training nodes"},
    {"seed", "root seed for splits, initialization, dropout and visibility"},
};
const std::vector<ConfigKey> kSplitKeys{
    {"train_size", "training nodes per split"},
    {"val_size", "validation nodes per split"},
    {"test_size", "test nodes per split"},
    {"support_size", "support nodes per split"},
};

std::vector<ConfigKey> join(std::initializer_list<const std::vector<ConfigKey>*> parts) {
    std::vector<ConfigKey> out;
    for (const auto* p : parts) out.insert(out.end(), p->begin(), p->end());
    out.push_back({"out", "output directory"});
    return out;
}

const std::vector<ConfigKey> kTrainExtra{
    {"model", "gcn or label-gcn"},
    {"support_fraction", "fraction of support labels revealed when scoring the test set"},
};
const std::vector<ConfigKey> kSweepExtra{
    {"fractions", "comma-separated support fractions"},
    {"splits", "random splits"},
    {"inits", "initializations per split"},
    {"baseline", "also run the plain GCN", true},
    {"jobs", "worker threads for independent trials"},
};
const std::vector<ConfigKey> kInductiveExtra{
    {"inits", "initializations per model"},
    {"protocol", "hide-scored-step or leave-one-out"},
    {"last_train_step", "last time step used for training"},
    {"last_step", "last time step scored"},
    {"shutdown_step", "first step of the post-shutdown aggregate"},
    {"jobs", "worker threads for independent runs"},
};
const std::vector<ConfigKey> kGradExtra{
    {"seed", "fixture seed"},
    {"gradcheck_nodes", "nodes in the random fixture graph"},
    {"gradcheck_coords", "coordinates checked per block"},
    {"corrupt_adjoint", "test hook: use a wrong adjoint for the input gradient", true},
};
const std::vector<ConfigKey> kAnalyzeExtra{
    {"bins", "histogram bins over [-1, 1]"},
};

std::size_t parse_count(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw UsageError(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw UsageError(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

int parse_int(const std::string& key, const std::string& v) {
    int out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw UsageError(key + ": expected an integer, got '" + v + "'");
    return out;
}

double parse_real(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double out = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out)) {
        throw UsageError(key + ": expected a number, got '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_real(key, std::string(strip(item))));
    if (out.empty()) throw UsageError(key + ": empty list");
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string protocol_name(InductiveLabelProtocol p) {
    return p == InductiveLabelProtocol::hide_scored_step ? "hide-scored-step" : "leave-one-out";
}

}  // namespace

std::string_view command_name(Command c) {
    switch (c) {
        case Command::train: return "train";
        case Command::sweep: return "sweep";
        case Command::inductive: return "inductive";
        case Command::gradcheck: return "gradcheck";
        case Command::analyze_labels: return "analyze-labels";
    }
    return "?";
}

KeyValues parse_config_text(std::string_view text, const std::string& origin) {
    KeyValues kv;
    std::size_t line_no = 0, pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = strip(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw UsageError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key(strip(line.substr(0, eq)));
        if (key.empty()) throw UsageError(origin + ":" + std::to_string(line_no) + ": empty key");
        if (!kv.emplace(key, std::string(strip(line.substr(eq + 1)))).second) {
            throw UsageError(origin + ":" + std::to_string(line_no) + ": repeated key '" + key + "'");
        }
        if (end == text.size()) break;
    }
    return kv;
}

KeyValues read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path.string());
}

const std::vector<ConfigKey>& config_keys(Command c) {
    static const std::vector<ConfigKey> train = join({&kDataKeys, &kTrainExtra, &kModelKeys, &kSplitKeys});
    static const std::vector<ConfigKey> sweep = join({&kDataKeys, &kModelKeys, &kSplitKeys, &kSweepExtra});
    static const std::vector<ConfigKey> inductive = join({&kDataKeys, &kModelKeys, &kInductiveExtra});
    static const std::vector<ConfigKey> grad = join({&kGradExtra});
    static const std::vector<ConfigKey> analyze = join({&kDataKeys, &kAnalyzeExtra});
    switch (c) {
        case Command::train: return train;
        case Command::sweep: return sweep;
        case Command::inductive: return inductive;
        case Command::gradcheck: return grad;
        case Command::analyze_labels: return analyze;
    }
    return grad;
}

RunConfig resolve_config(Command c, const KeyValues& kv) {
    std::set<std::string> known;
    for (const auto& k : config_keys(c)) known.insert(k.name);
    for (const auto& [k, v] : kv) {
        if (!known.count(k)) throw UsageError("unknown key '" + k + "' for " + std::string(command_name(c)));
    }
    auto get = [&](const std::string& k) -> const std::string* {
        const auto it = kv.find(k);
        return it == kv.end() ? nullptr : &it->second;
    };

    RunConfig r;
    r.out = get("out") ? std::filesystem::path(*get("out")) : std::filesystem::path("labelgcn-out");
    if (const auto* v = get("seed")) r.seed = parse_u64("seed", *v);

    if (c == Command::gradcheck) {
        if (const auto* v = get("gradcheck_nodes")) r.gradcheck_nodes = parse_count("gradcheck_nodes", *v);
        if (const auto* v = get("gradcheck_coords")) r.gradcheck_coords = parse_count("gradcheck_coords", *v);
        if (const auto* v = get("corrupt_adjoint")) r.corrupt_adjoint = parse_bool("corrupt_adjoint", *v);
        if (r.gradcheck_nodes < 2) throw UsageError("gradcheck_nodes must be at least 2");
        if (r.gradcheck_coords == 0) throw UsageError("gradcheck_coords must be positive");
        return r;
    }

    if (!get("dataset") || get("dataset")->empty()) throw UsageError("missing dataset (--dataset)");
    r.dataset = *get("dataset");
    if (const auto* v = get("data_dir")) {
        r.data_dir = *v;
    } else if (const char* env = std::getenv("LABELGCN_DATA_DIR"); env && *env) {
        r.data_dir = env;
    } else {
        r.data_dir = "data";
    }
    const bool elliptic = r.dataset == "elliptic" || get("features_csv") || get("classes_csv") || get("edgelist_csv");
    auto path_or = [&](const std::string& key, const std::filesystem::path& fallback) {
        const auto* v = get(key);
        return v ? std::filesystem::path(*v) : fallback;
    };
    if (elliptic) {
        if (get("content") || get("cites")) throw UsageError("citation and Elliptic paths cannot be mixed");
        const auto dir = r.data_dir / "elliptic";
        r.features_csv = path_or("features_csv", dir / "elliptic_txs_features.csv");
        r.classes_csv = path_or("classes_csv", dir / "elliptic_txs_classes.csv");
        r.edgelist_csv = path_or("edgelist_csv", dir / "elliptic_txs_edgelist.csv");
    } else {
        const auto dir = r.data_dir / r.dataset;
        r.content = path_or("content", dir / (r.dataset + ".content"));
        r.cites = path_or("cites", dir / (r.dataset + ".cites"));
    }
    if (const auto* v = get("normalize_features")) r.normalize_features = parse_bool("normalize_features", *v);

    if (c == Command::analyze_labels) {
        if (const auto* v = get("bins")) r.bins = parse_count("bins", *v);
        if (r.bins == 0) throw UsageError("bins must be positive");
        return r;
    }

    const auto preset = preset_for(r.dataset);
    const bool inductive = c == Command::inductive;
    r.hidden = inductive ? 100 : (preset ? preset->hidden_dim : 16);
    r.lr = inductive ? 0.001 : (preset ? preset->learning_rate : 0.01);
    r.epochs = inductive ? 1000 : 300;
    r.patience = inductive ? 0 : (preset ? preset->patience : 10);
    r.oversample = inductive ? 6 : 1;
    if (const auto* v = get("hidden")) r.hidden = parse_count("hidden", *v);
    if (const auto* v = get("dropout")) r.dropout = parse_real("dropout", *v);
    if (const auto* v = get("lr")) r.lr = parse_real("lr", *v);
    if (const auto* v = get("epochs")) r.epochs = parse_count("epochs", *v);
    if (const auto* v = get("patience")) r.patience = parse_count("patience", *v);
    if (const auto* v = get("oversample")) r.oversample = parse_count("oversample", *v);
    if (const auto* v = get("jobs")) {
        const std::size_t j = parse_count("jobs", *v);
        if (j == 0 || j > 1024) throw UsageError("jobs must lie in [1, 1024]");
        r.jobs = static_cast<unsigned>(j);
    }
    if (r.hidden == 0) throw UsageError("hidden must be positive");
    if (!(r.dropout >= 0.0 && r.dropout < 1.0)) throw UsageError("dropout must lie in [0, 1)");
    if (!(r.lr > 0.0)) throw UsageError("lr must be positive");
    if (r.epochs == 0) throw UsageError("epochs must be positive");
    if (r.oversample == 0) throw UsageError("oversample must be at least 1");

    if (inductive) {
        if (const auto* v = get("inits")) r.inits = parse_count("inits", *v);
        if (const auto* v = get("protocol")) {
            if (*v == "hide-scored-step") r.protocol = InductiveLabelProtocol::hide_scored_step;
            else if (*v == "leave-one-out") r.protocol = InductiveLabelProtocol::leave_one_out;
            else throw UsageError("protocol: expected hide-scored-step or leave-one-out, got '" + *v + "'");
        }
        if (const auto* v = get("last_train_step")) r.last_train_step = parse_int("last_train_step", *v);
        if (const auto* v = get("last_step")) r.last_step = parse_int("last_step", *v);
        if (const auto* v = get("shutdown_step")) r.shutdown_step = parse_int("shutdown_step", *v);
        if (r.inits == 0) throw UsageError("inits must be positive");
        if (!(r.last_train_step >= 1 && r.last_train_step < r.last_step)) {
            throw UsageError("need 1 <= last_train_step < last_step");
        }
        return r;
    }

    // train and sweep: split sizes come from the dataset preset unless given.
    const char* size_keys[] = {"train_size", "val_size", "test_size", "support_size"};
    std::size_t* size_slots[] = {&r.sizes.train, &r.sizes.validation, &r.sizes.test, &r.sizes.support};
    if (preset) r.sizes = preset->sizes;
    for (int k = 0; k < 4; ++k) {
        if (const auto* v = get(size_keys[k])) {
            *size_slots[k] = parse_count(size_keys[k], *v);
        } else if (!preset) {
            throw UsageError(std::string("dataset '") + r.dataset + "' has no preset split; set " + size_keys[k]);
        }
    }
    if (r.sizes.train == 0 || r.sizes.test == 0) throw UsageError("train_size and test_size must be positive");
    if (r.patience > 0 && r.sizes.validation == 0) throw UsageError("early stopping needs val_size > 0");

    if (c == Command::train) {
        if (const auto* v = get("model")) {
            if (*v == "gcn") r.label_gcn = false;
            else if (*v == "label-gcn") r.label_gcn = true;
            else throw UsageError("model: expected gcn or label-gcn, got '" + *v + "'");
        }
        if (const auto* v = get("support_fraction")) r.support_fraction = parse_real("support_fraction", *v);
        if (!(r.support_fraction >= 0.0 && r.support_fraction <= 1.0)) {
            throw UsageError("support_fraction must lie in [0, 1]");
        }
        return r;
    }

    r.fractions = {0.0, 0.25, 0.62, 1.0};
    if (const auto* v = get("fractions")) r.fractions = parse_list("fractions", *v);
    for (double f : r.fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw UsageError("fractions must lie in [0, 1]");
    }
    if (const auto* v = get("splits")) r.splits = parse_count("splits", *v);
    if (const auto* v = get("inits")) r.inits = parse_count("inits", *v);
    if (const auto* v = get("baseline")) r.baseline = parse_bool("baseline", *v);
    if (r.splits == 0 || r.inits == 0) throw UsageError("splits and inits must be positive");
    return r;
}

std::string manifest_text(Command c, const RunConfig& r) {
    std::ostringstream os;
    os << "# labelgcn " << LABELGCN_VERSION << " run manifest\n"
       << "# command: " << command_name(c) << "\n"
       << "# re-run: labelgcn " << command_name(c) << " --config <this file>\n"
       << "# every split, initialization, dropout and visibility stream derives from seed\n";
    auto boolean = [](bool b) { return b ? "true" : "false"; };
    for (const auto& key : config_keys(c)) {
        const std::string& k = key.name;
        std::string v;
        if (k == "dataset") v = r.dataset;
        else if (k == "data_dir") v = r.data_dir.string();
        else if (k == "content") v = r.content.string();
        else if (k == "cites") v = r.cites.string();
        else if (k == "features_csv") v = r.features_csv.string();
        else if (k == "classes_csv") v = r.classes_csv.string();
        else if (k == "edgelist_csv") v = r.edgelist_csv.string();
        else if (k == "normalize_features") v = boolean(r.normalize_features);
        else if (k == "out") v = r.out.string();
        else if (k == "model") v = r.label_gcn ? "label-gcn" : "gcn";
        else if (k == "hidden") v = std::to_string(r.hidden);
        else if (k == "dropout") v = fmt(r.dropout);
        else if (k == "lr") v = fmt(r.lr);
        else if (k == "epochs") v = std::to_string(r.epochs);
        else if (k == "patience") v = std::to_string(r.patience);
        else if (k == "oversample") v = std::to_string(r.oversample);
        else if (k == "seed") v = std::to_string(r.seed);
        else if (k == "train_size") v = std::to_string(r.sizes.train);
        else if (k == "val_size") v = std::to_string(r.sizes.validation);
        else if (k == "test_size") v = std::to_string(r.sizes.test);
        else if (k == "support_size") v = std::to_string(r.sizes.support);
        else if (k == "support_fraction") v = fmt(r.support_fraction);
        else if (k == "fractions") {
            for (std::size_t i = 0; i < r.fractions.size(); ++i) v += (i ? "," : "") + fmt(r.fractions[i]);
        } else if (k == "splits") v = std::to_string(r.splits);
        else if (k == "inits") v = std::to_string(r.inits);
        else if (k == "baseline") v = boolean(r.baseline);
        else if (k == "jobs") v = std::to_string(r.jobs);
        else if (k == "protocol") v = protocol_name(r.protocol);
        else if (k == "last_train_step") v = std::to_string(r.last_train_step);
        else if (k == "last_step") v = std::to_string(r.last_step);
        else if (k == "shutdown_step") v = std::to_string(r.shutdown_step);
        else if (k == "bins") v = std::to_string(r.bins);
        else if (k == "gradcheck_nodes") v = std::to_string(r.gradcheck_nodes);
        else if (k == "gradcheck_coords") v = std::to_string(r.gradcheck_coords);
        else if (k == "corrupt_adjoint") v = boolean(r.corrupt_adjoint);
        if (v.empty()) continue;  // path keys of the other dataset layout
        os << k << " = " << v << '\n';
    }
    return os.str();
}

GraphDataset load_dataset(const RunConfig& r) {
    const std::vector<std::filesystem::path> needed =
        r.is_elliptic() ? std::vector{r.features_csv, r.classes_csv, r.edgelist_csv} : std::vector{r.content, r.cites};
    for (const auto& p : needed) {
        if (!std::filesystem::is_regular_file(p)) throw UsageError("dataset file not found: " + p.string());
    }
    GraphDataset ds = r.is_elliptic() ? load_elliptic(r.features_csv, r.classes_csv, r.edgelist_csv)
                                      : load_citation(r.content, r.cites, r.dataset);
    ds.name = r.dataset;
    if (r.normalize_features) row_normalize_features(ds);
    return ds;
}

}  // namespace labelgcn
