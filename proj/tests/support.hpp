// Test-only helpers: dense reference evaluations that share no code with the
// CSR kernels, random fixtures, and a synthetic citation-style dataset.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "labelgcn/dense.hpp"
#include "labelgcn/graph_data.hpp"
#include "labelgcn/model.hpp"
#include "labelgcn/random.hpp"
#include "labelgcn/sparse.hpp"

namespace testsupport {

using labelgcn::DenseMatrix;
using labelgcn::Edge;

using Dense = std::vector<std::vector<double>>;

inline Dense dense_zeros(std::size_t r, std::size_t c) { return Dense(r, std::vector<double>(c, 0.0)); }

inline Dense to_nested(const DenseMatrix& m) {
    Dense out = dense_zeros(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
    return out;
}

inline Dense dense_mul(const Dense& a, const Dense& b) {
    const std::size_t n = a.size(), m = b.empty() ? 0 : b[0].size(), inner = b.size();
    Dense out = dense_zeros(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < inner; ++k) acc += a[i][k] * b[k][j];
            out[i][j] = acc;
        }
    return out;
}

inline Dense dense_sub(const Dense& a, const Dense& b) {
    Dense out = a;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) out[i][j] -= b[i][j];
    return out;
}

/// Symmetric 0/1 adjacency straight from an edge list.
inline Dense dense_adjacency(const std::vector<Edge>& edges, std::size_t n) {
    Dense a = dense_zeros(n, n);
    for (auto [u, v] : edges) {
        if (u == v) continue;
        a[u][v] = 1.0;
        a[v][u] = 1.0;
    }
    return a;
}

/// D^{-1/2} (A + I) D^{-1/2} as two dense products with an explicit diagonal.
inline Dense dense_normalized(const Dense& a) {
    const std::size_t n = a.size();
    Dense tilde = a;
    for (std::size_t i = 0; i < n; ++i) tilde[i][i] += 1.0;
    Dense dinv = dense_zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (double v : tilde[i]) deg += v;
        dinv[i][i] = std::pow(deg, -0.5);
    }
    return dense_mul(dense_mul(dinv, tilde), dinv);
}

/// Masked first-layer term written as in the layer definition:
/// A X - diag(A) X sum_j e_j e_j^T.
inline Dense dense_masked(const Dense& ahat, const Dense& x, const std::vector<std::size_t>& label_cols) {
    const std::size_t n = ahat.size(), d = x.empty() ? 0 : x[0].size();
    Dense diag = dense_zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) diag[i][i] = ahat[i][i];
    Dense selector = dense_zeros(d, d);
    for (std::size_t c : label_cols) selector[c][c] = 1.0;  // sum of e_j e_j^T
    return dense_sub(dense_mul(ahat, x), dense_mul(dense_mul(diag, x), selector));
}

/// Eval-mode network output written with nested vectors only.
inline Dense dense_forward_probs(const Dense& ahat, const Dense& x, const std::vector<std::size_t>& label_cols,
                                 bool masked, const labelgcn::ModelParams& p) {
    const auto relu = [](Dense m) {
        for (auto& row : m)
            for (double& v : row) v = std::max(v, 0.0);
        return m;
    };
    const Dense agg = masked ? dense_masked(ahat, x, label_cols) : dense_mul(ahat, x);
    const Dense h1 = relu(dense_mul(agg, to_nested(p.w0)));
    const Dense h2 = relu(dense_mul(dense_mul(ahat, h1), to_nested(p.w1)));
    Dense logits = dense_mul(h2, to_nested(p.w2));
    for (auto& row : logits) {
        double z = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) z += std::exp(row[c] + p.b2[c]);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] = std::exp(row[c] + p.b2[c]) / z;
    }
    return logits;
}

/// max |a - b| / max(max |b|, tiny)
inline double rel_error(const Dense& a, const Dense& b) {
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) {
            diff = std::max(diff, std::abs(a[i][j] - b[i][j]));
            scale = std::max(scale, std::abs(b[i][j]));
        }
    return diff / std::max(scale, 1e-300);
}

inline std::vector<Edge> random_edges(std::size_t n, double p, labelgcn::Rng& rng) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.uniform() < p) {
                // Mix orientations and duplicates to exercise coalescing.
                if (rng.uniform() < 0.5) edges.emplace_back(i, j); else edges.emplace_back(j, i);
                if (rng.uniform() < 0.1) edges.emplace_back(i, j);
            }
    return edges;
}

inline DenseMatrix random_dense(std::size_t r, std::size_t c, labelgcn::Rng& rng, double sparsity = 0.0) {
    DenseMatrix m(r, c);
    for (double& v : m.data()) v = rng.uniform() < sparsity ? 0.0 : rng.uniform(-1.0, 1.0);
    return m;
}

/// Central-difference gradient of f at every coordinate of `x`.
inline DenseMatrix numeric_gradient(DenseMatrix x, const std::function<double(const DenseMatrix&)>& f,
                                    double eps = 1e-5) {
    DenseMatrix g(x.rows(), x.cols());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double orig = x.data()[k];
        x.data()[k] = orig + eps;
        const double up = f(x);
        x.data()[k] = orig - eps;
        const double down = f(x);
        x.data()[k] = orig;
        g.data()[k] = (up - down) / (2.0 * eps);
    }
    return g;
}

/// Homophilous planted-partition graph with noisy bag-of-words features.
/// Every node is labeled; nodes of the same class link with p_in, others
/// with p_out; each class prefers its own block of words.
struct SyntheticSpec {
    std::size_t n = 300;
    std::size_t classes = 3;
    std::size_t words = 60;
    double p_in = 0.03;
    double p_out = 0.002;
    double word_signal = 0.08;  ///< probability of a class word
    double word_noise = 0.05;   ///< probability of any other word
    std::uint64_t seed = 1;
};

inline labelgcn::GraphDataset synthetic_dataset(const SyntheticSpec& s) {
    labelgcn::Rng rng(s.seed);
    labelgcn::GraphDataset ds;
    ds.name = "synthetic";
    for (std::size_t c = 0; c < s.classes; ++c) ds.class_names.push_back("class" + std::to_string(c));
    ds.features = DenseMatrix(s.n, s.words);
    const std::size_t block = s.words / s.classes;
    for (std::size_t i = 0; i < s.n; ++i) {
        const std::size_t cls = i % s.classes;
        ds.labels.emplace_back(cls);
        ds.node_ids.push_back("n" + std::to_string(i));
        for (std::size_t w = 0; w < s.words; ++w) {
            const bool own = w / block == cls;
            ds.features(i, w) = rng.uniform() < (own ? s.word_signal : s.word_noise) ? 1.0 : 0.0;
        }
    }
    for (std::size_t i = 0; i < s.n; ++i)
        for (std::size_t j = i + 1; j < s.n; ++j)
            if (rng.uniform() < (*ds.labels[i] == *ds.labels[j] ? s.p_in : s.p_out)) ds.edges.emplace_back(i, j);
    return ds;
}

/// Writes `ds` in the tab-separated .content/.cites layout.
inline void write_citation_files(const labelgcn::GraphDataset& ds, const std::filesystem::path& content,
                                 const std::filesystem::path& cites) {
    std::ofstream c(content);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        c << ds.node_ids[i];
        for (double v : ds.features.row(i)) c << '\t' << v;
        c << '\t' << ds.class_names[*ds.labels[i]] << '\n';
    }
    std::ofstream e(cites);
    for (auto [u, v] : ds.edges) e << ds.node_ids[u] << '\t' << ds.node_ids[v] << '\n';
}

/// Small Elliptic-style dataset: `steps` time steps, each its own random
/// component, illicit nodes clustered so neighbor labels carry signal.
inline labelgcn::GraphDataset synthetic_elliptic(std::size_t per_step, int steps, std::uint64_t seed) {
    labelgcn::Rng rng(seed);
    labelgcn::GraphDataset ds;
    ds.name = "elliptic";
    ds.label_encoding = labelgcn::LabelEncoding::scalar_map;
    ds.class_names = {"licit", "illicit"};
    ds.class_scalars = {-1.0, 1.0};
    ds.positive_class = 1;
    const std::size_t d = 6;
    std::vector<double> feats;
    for (int t = 1; t <= steps; ++t) {
        const std::size_t base = ds.node_ids.size();
        for (std::size_t k = 0; k < per_step; ++k) {
            const bool illicit = k < per_step / 4;
            const double u = rng.uniform();
            ds.labels.push_back(u < 0.3 ? std::nullopt : std::optional<std::size_t>(illicit ? 1 : 0));
            ds.time_step.push_back(t);
            ds.node_ids.push_back(std::to_string(1000 * t + static_cast<int>(k)));
            feats.push_back(static_cast<double>(t));
            for (std::size_t f = 1; f < d; ++f) feats.push_back(rng.uniform(-1.0, 1.0) + (illicit && f == 1 ? 0.4 : 0.0));
        }
        for (std::size_t a = 0; a < per_step; ++a)
            for (std::size_t b = a + 1; b < per_step; ++b) {
                const bool same = (a < per_step / 4) == (b < per_step / 4);
                if (rng.uniform() < (same ? 0.15 : 0.01)) ds.edges.emplace_back(base + a, base + b);
            }
    }
    ds.features = DenseMatrix(ds.node_ids.size(), d, std::move(feats));
    return ds;
}

inline void write_elliptic_files(const labelgcn::GraphDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream f(dir / "elliptic_txs_features.csv");
    for (std::size_t i = 0; i < ds.n(); ++i) {
        f << ds.node_ids[i];
        for (double v : ds.features.row(i)) f << ',' << v;
        f << '\n';
    }
    std::ofstream c(dir / "elliptic_txs_classes.csv");
    c << "txId,class\n";
    for (std::size_t i = 0; i < ds.n(); ++i) {
        c << ds.node_ids[i] << ',' << (!ds.labels[i] ? "unknown" : (*ds.labels[i] == 1 ? "1" : "2")) << '\n';
    }
    std::ofstream e(dir / "elliptic_txs_edgelist.csv");
    e << "txId1,txId2\n";
    for (auto [u, v] : ds.edges) e << ds.node_ids[u] << ',' << ds.node_ids[v] << '\n';
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("labelgcn_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testsupport
