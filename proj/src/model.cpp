#include "labelgcn/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "labelgcn/error.hpp"
#include "labelgcn/random.hpp"

namespace labelgcn {

namespace {

constexpr double kProbFloor = 1e-12;

void require_shape(const DenseMatrix& m, std::size_t rows, std::size_t cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                             ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

void check_params(const ModelParams& p, const ModelConfig& c) {
    require_shape(p.w0, c.input_dim, c.hidden_dim, "W0");
    require_shape(p.w1, c.hidden_dim, c.hidden_dim, "W1");
    require_shape(p.w2, c.hidden_dim, c.n_classes, "W2");
    if (p.b2.size() != c.n_classes) throw DimensionError("b2: expected one bias per class");
}

DenseMatrix glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseMatrix w(fan_in, fan_out);
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    return w;
}

DenseMatrix dropout_multipliers(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
    DenseMatrix m(rows, cols);
    const double keep = 1.0 - rate;
    const double scale = 1.0 / keep;
    for (double& v : m.data()) v = rng.uniform() < keep ? scale : 0.0;
    return m;
}

// ReLU in place on a copy, then optional dropout.
DenseMatrix activate(const DenseMatrix& pre, const DenseMatrix& drop) {
    DenseMatrix out = pre;
    auto o = out.data();
    for (std::size_t k = 0; k < o.size(); ++k) {
        if (o[k] < 0.0) o[k] = 0.0;
        if (!drop.empty()) o[k] *= drop.data()[k];
    }
    return out;
}

// Gradient through dropout and ReLU, given the upstream gradient.
void backprop_activation(DenseMatrix& grad, const DenseMatrix& pre, const DenseMatrix& drop) {
    auto g = grad.data();
    const auto p = pre.data();
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!(p[k] > 0.0)) {
            g[k] = 0.0;
        } else if (!drop.empty()) {
            g[k] *= drop.data()[k];
        }
    }
}

double weight_total(std::span<const Target> targets) {
    if (targets.empty()) throw std::invalid_argument("loss: empty target set");
    double total = 0.0;
    for (const auto& t : targets) {
        if (!(t.weight >= 0.0) || !std::isfinite(t.weight)) throw std::invalid_argument("loss: negative node weight");
        total += t.weight;
    }
    if (!(total > 0.0)) throw std::invalid_argument("loss: node weights sum to zero");
    return total;
}

}  // namespace

void ModelConfig::validate() const {
    if (input_dim == 0 || hidden_dim == 0 || n_classes == 0) {
        throw std::invalid_argument("model config: dimensions must be positive");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw std::invalid_argument("model config: dropout rate must lie in [0, 1)");
    }
}

ModelParams ModelParams::zeros(const ModelConfig& c) {
    return ModelParams{DenseMatrix(c.input_dim, c.hidden_dim), DenseMatrix(c.hidden_dim, c.hidden_dim),
                       DenseMatrix(c.hidden_dim, c.n_classes), std::vector<double>(c.n_classes, 0.0)};
}

bool ModelParams::all_finite() const {
    return w0.all_finite() && w1.all_finite() && w2.all_finite() &&
           std::all_of(b2.begin(), b2.end(), [](double v) { return std::isfinite(v); });
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng r0(derive_seed(seed, {0}));
    Rng r1(derive_seed(seed, {1}));
    Rng r2(derive_seed(seed, {2}));
    return ModelParams{glorot(config.input_dim, config.hidden_dim, r0), glorot(config.hidden_dim, config.hidden_dim, r1),
                       glorot(config.hidden_dim, config.n_classes, r2), std::vector<double>(config.n_classes, 0.0)};
}

PropagatedInput propagate_input(const ModelConfig& config, const SparseMatrix& ahat, const InputMatrix& input) {
    if (input.x.cols() != config.input_dim) {
        throw DimensionError("input has " + std::to_string(input.x.cols()) + " columns, model expects " +
                             std::to_string(config.input_dim));
    }
    if (config.masked_first_layer) {
        return PropagatedInput{SparseMatrix::from_dense(propagate_masked(ahat, input.x, input.mask)), input.mask};
    }
    return PropagatedInput{SparseMatrix::from_dense(spmm(ahat, input.x)), LabelColumnMask{}};
}

ForwardTrace forward(const ModelParams& params, const ModelConfig& config, const SparseMatrix& ahat,
                     const PropagatedInput& input, Mode mode, std::uint64_t dropout_seed) {
    config.validate();
    check_params(params, config);
    const std::size_t n = ahat.rows();
    if (input.aggregate.rows() != n || input.aggregate.cols() != config.input_dim) {
        throw DimensionError("forward: propagated input does not match graph and model");
    }

    ForwardTrace t;
    const bool drop = mode == Mode::train && config.dropout_rate > 0.0;
    if (drop) {
        Rng rng(derive_seed(dropout_seed, {0xd0}));
        t.drop1 = dropout_multipliers(n, config.hidden_dim, config.dropout_rate, rng);
        t.drop2 = dropout_multipliers(n, config.hidden_dim, config.dropout_rate, rng);
    }

    t.pre1 = spmm(input.aggregate, params.w0);
    t.h1 = activate(t.pre1, t.drop1);
    t.agg2 = spmm(ahat, t.h1);
    t.pre2 = matmul(t.agg2, params.w1);
    t.h2 = activate(t.pre2, t.drop2);

    t.probs = matmul(t.h2, params.w2);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = t.probs.row(i);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += params.b2[c];
        const double top = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - top);
            sum += v;
        }
        for (double& v : row) v /= sum;
    }
    return t;
}

ForwardTrace forward(const ModelParams& params, const ModelConfig& config, const SparseMatrix& ahat,
                     const InputMatrix& input, Mode mode, std::uint64_t dropout_seed) {
    return forward(params, config, ahat, propagate_input(config, ahat, input), mode, dropout_seed);
}

double cross_entropy(const DenseMatrix& probs, std::span<const Target> targets) {
    const double total = weight_total(targets);
    double loss = 0.0;
    for (const auto& t : targets) {
        if (t.node >= probs.rows() || t.cls >= probs.cols()) throw DimensionError("loss: target outside output");
        loss -= t.weight * std::log(std::max(probs(t.node, t.cls), kProbFloor));
    }
    return loss / total;
}

LossAndGradients loss_and_gradients(const ModelParams& params, const ModelConfig& config, const SparseMatrix& ahat,
                                    const PropagatedInput& input, std::span<const Target> targets,
                                    const ForwardTrace& trace, bool want_input_grad) {
    check_params(params, config);
    LossAndGradients out;
    out.loss = cross_entropy(trace.probs, targets);
    const double total = weight_total(targets);

    const std::size_t n = trace.probs.rows();
    const std::size_t k = config.n_classes;
    DenseMatrix dlogits(n, k);
    for (const auto& t : targets) {
        const auto p = trace.probs.row(t.node);
        if (p[t.cls] < kProbFloor) continue;  // clamped: the term is locally constant
        const double w = t.weight / total;
        auto g = dlogits.row(t.node);
        for (std::size_t c = 0; c < k; ++c) g[c] += w * p[c];
        g[t.cls] -= w;
    }

    Gradients& g = out.grads;
    g.params.w2 = matmul_tn(trace.h2, dlogits);
    g.params.b2.assign(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < k; ++c) g.params.b2[c] += dlogits(i, c);
    }

    DenseMatrix d2 = matmul_nt(dlogits, params.w2);
    backprop_activation(d2, trace.pre2, trace.drop2);
    g.params.w1 = matmul_tn(trace.agg2, d2);

    DenseMatrix d1 = spmm_transpose(ahat, matmul_nt(d2, params.w1));
    backprop_activation(d1, trace.pre1, trace.drop1);
    g.params.w0 = spmm_transpose(input.aggregate, d1);

    if (want_input_grad) {
        g.aggregate = matmul_nt(d1, params.w0);
        g.input = config.masked_first_layer ? propagate_masked_adjoint(ahat, *g.aggregate, input.mask)
                                            : spmm_transpose(ahat, *g.aggregate);
    }
    return out;
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < values.size(); ++c) {
        if (values[c] > values[best]) best = c;
    }
    return best;
}

std::vector<Prediction> predict(const ModelParams& params, const ModelConfig& config, const SparseMatrix& ahat,
                                const PropagatedInput& input, std::span<const std::size_t> nodes) {
    const ForwardTrace t = forward(params, config, ahat, input, Mode::eval);
    std::vector<Prediction> out;
    out.reserve(nodes.size());
    for (std::size_t node : nodes) {
        if (node >= t.probs.rows()) throw DimensionError("predict: node outside graph");
        const auto row = t.probs.row(node);
        out.push_back(Prediction{node, argmax(row), std::vector<double>(row.begin(), row.end())});
    }
    return out;
}

DenseMatrix embeddings(const ModelParams& params, const ModelConfig& config, const SparseMatrix& ahat,
                       const PropagatedInput& input, std::span<const std::size_t> nodes) {
    return forward(params, config, ahat, input, Mode::eval).h2.gather_rows(nodes);
}

namespace {

void write_matrix(std::ostream& os, const char* name, const DenseMatrix& m) {
    os << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    char buf[64];
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%a", m(r, c));
            os << (c ? " " : "") << buf;
        }
        os << '\n';
    }
}

double read_hex(std::istream& is) {
    std::string tok;
    if (!(is >> tok)) throw DataError("checkpoint: truncated");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw DataError("checkpoint: bad number '" + tok + "'");
    return v;
}

DenseMatrix read_matrix(std::istream& is, const char* name) {
    std::string kw, got;
    std::size_t rows = 0, cols = 0;
    if (!(is >> kw >> got >> rows >> cols) || kw != "matrix" || got != name) {
        throw DataError(std::string("checkpoint: expected matrix ") + name);
    }
    DenseMatrix m(rows, cols);
    for (double& v : m.data()) v = read_hex(is);
    return m;
}

template <typename T>
T read_field(std::istream& is, const char* key) {
    std::string k;
    T v{};
    if (!(is >> k >> v) || k != key) throw DataError(std::string("checkpoint: expected field ") + key);
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ModelParams& params) {
    check_params(params, config);
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path.string());
    char rate[64];
    std::snprintf(rate, sizeof rate, "%a", config.dropout_rate);
    os << "labelgcn-checkpoint 1\n"
       << "input_dim " << config.input_dim << '\n'
       << "hidden_dim " << config.hidden_dim << '\n'
       << "n_classes " << config.n_classes << '\n'
       << "dropout_rate " << rate << '\n'
       << "masked_first_layer " << (config.masked_first_layer ? 1 : 0) << '\n';
    write_matrix(os, "W0", params.w0);
    write_matrix(os, "W1", params.w1);
    write_matrix(os, "W2", params.w2);
    write_matrix(os, "b2", DenseMatrix(1, params.b2.size(), params.b2));
    if (!os) throw DataError("failed writing " + path.string());
}

std::pair<ModelConfig, ModelParams> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open " + path.string());
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != "labelgcn-checkpoint" || version != 1) {
        throw DataError(path.string() + ": not a checkpoint");
    }
    ModelConfig c;
    c.input_dim = read_field<std::size_t>(is, "input_dim");
    c.hidden_dim = read_field<std::size_t>(is, "hidden_dim");
    c.n_classes = read_field<std::size_t>(is, "n_classes");
    {
        std::string k;
        if (!(is >> k) || k != "dropout_rate") throw DataError("checkpoint: expected field dropout_rate");
        c.dropout_rate = read_hex(is);
    }
    c.masked_first_layer = read_field<int>(is, "masked_first_layer") != 0;
    ModelParams p;
    p.w0 = read_matrix(is, "W0");
    p.w1 = read_matrix(is, "W1");
    p.w2 = read_matrix(is, "W2");
    const DenseMatrix b = read_matrix(is, "b2");
    p.b2.assign(b.data().begin(), b.data().end());
    c.validate();
    check_params(p, c);
    return {c, p};
}

}  // namespace labelgcn
