#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "labelgcn/dense.hpp"
#include "labelgcn/graph_data.hpp"
#include "labelgcn/sparse.hpp"

namespace labelgcn {

/// Two graph convolutions (ReLU, dropout after each) and a dense softmax head.
struct ModelConfig {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 16;
    std::size_t n_classes = 0;
    double dropout_rate = 0.5;
    /// Label-GCN when set: the first convolution drops self-loops on the
    /// label columns.
    bool masked_first_layer = false;

    /// Throws std::invalid_argument on zero dims or a rate outside [0, 1).
    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ModelParams {
    DenseMatrix w0;  ///< input_dim x hidden
    DenseMatrix w1;  ///< hidden x hidden
    DenseMatrix w2;  ///< hidden x K
    std::vector<double> b2;

    /// Zeros with the shapes `config` implies.
    static ModelParams zeros(const ModelConfig& config);
    bool all_finite() const;
    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Glorot-uniform weights, zero bias.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

enum class Mode { train, eval };

/// First-layer aggregate of an input matrix. It only depends on the graph and
/// the input, so it is computed once and reused across epochs.
struct PropagatedInput {
    SparseMatrix aggregate;  ///< n x input_dim, propagate_masked or spmm output
    LabelColumnMask mask;    ///< empty for the standard layer
};

/// Uses propagate_masked when config.masked_first_layer is set, spmm otherwise.
PropagatedInput propagate_input(const ModelConfig& config, const SparseMatrix& ahat, const InputMatrix& input);

struct ForwardTrace {
    DenseMatrix pre1;       ///< P W0
    DenseMatrix h1;         ///< after ReLU and dropout
    DenseMatrix agg2;       ///< Ahat h1
    DenseMatrix pre2;       ///< agg2 W1
    DenseMatrix h2;         ///< after ReLU and dropout
    DenseMatrix probs;      ///< n x K softmax output
    DenseMatrix drop1;      ///< dropout multipliers (0 or 1/(1-rate)); empty in eval mode
    DenseMatrix drop2;
};

ForwardTrace forward(const ModelParams& params, const ModelConfig& config, const SparseMatrix& ahat,
                     const PropagatedInput& input, Mode mode, std::uint64_t dropout_seed = 0);

/// Convenience overload that propagates `input` first.
ForwardTrace forward(const ModelParams& params, const ModelConfig& config, const SparseMatrix& ahat,
                     const InputMatrix& input, Mode mode, std::uint64_t dropout_seed = 0);

struct Target {
    std::size_t node;
    std::size_t cls;
    double weight = 1.0;
};

struct Gradients {
    ModelParams params;
    /// dL/dP for the first-layer aggregate P, filled when the input gradient is requested.
    std::optional<DenseMatrix> aggregate;
    /// dL/dX, filled when requested; goes through propagate_masked_adjoint.
    std::optional<DenseMatrix> input;
};

struct LossAndGradients {
    double loss = 0.0;
    Gradients grads;
};

/// Weighted-mean cross-entropy over `targets` (probabilities clamped at 1e-12)
/// and its exact gradients given the trace of the same forward pass. Throws
/// std::invalid_argument for an empty target set, negative weights or a zero
/// weight total.
LossAndGradients loss_and_gradients(const ModelParams& params, const ModelConfig& config, const SparseMatrix& ahat,
                                    const PropagatedInput& input, std::span<const Target> targets,
                                    const ForwardTrace& trace, bool want_input_grad = false);

/// Loss only, from a trace.
double cross_entropy(const DenseMatrix& probs, std::span<const Target> targets);

struct Prediction {
    std::size_t node;
    std::size_t cls;  ///< argmax, ties to the lower index
    std::vector<double> probs;
};

/// Index of the largest value, lowest index on ties.
std::size_t argmax(std::span<const double> values);

std::vector<Prediction> predict(const ModelParams& params, const ModelConfig& config, const SparseMatrix& ahat,
                                const PropagatedInput& input, std::span<const std::size_t> nodes);

/// Eval-mode activations of the last hidden layer for `nodes`.
DenseMatrix embeddings(const ModelParams& params, const ModelConfig& config, const SparseMatrix& ahat,
                       const PropagatedInput& input, std::span<const std::size_t> nodes);

/// Text checkpoint: config echo plus every parameter in hexadecimal floating
/// point, so a save/load cycle is bit-exact.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ModelParams& params);
std::pair<ModelConfig, ModelParams> load_checkpoint(const std::filesystem::path& path);

}  // namespace labelgcn
