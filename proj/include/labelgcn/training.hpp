#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelgcn/graph_data.hpp"
#include "labelgcn/metrics.hpp"
#include "labelgcn/model.hpp"

namespace labelgcn {

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t max_epochs = 300;
    /// Early-stopping patience on validation loss; nullopt trains for exactly
    /// max_epochs and keeps the final parameters.
    std::optional<std::size_t> patience = 10;
    /// Training nodes of `oversample_class` count `oversample_factor` times.
    std::size_t oversample_factor = 1;
    std::optional<std::size_t> oversample_class;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

struct AdamState {
    ModelParams m;
    ModelParams v;
    std::size_t step = 0;

    static AdamState zeros(const ModelConfig& config);
};

/// One bias-corrected Adam update of every parameter.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const TrainConfig& config);

/// Cross-entropy targets for labeled `nodes`, with oversampling weights.
std::vector<Target> make_targets(const GraphDataset& ds, std::span<const std::size_t> nodes,
                                 const TrainConfig& config);

struct PhaseMetrics {
    std::size_t count = 0;
    double loss = 0.0;
    double accuracy = 0.0;
    ConfusionCounts positive_counts;  ///< only meaningful when the dataset has a positive class
    PrecisionRecallF1 positive;
};

/// Eval-mode metrics on the labeled `nodes`.
PhaseMetrics evaluate(const ModelParams& params, const ModelConfig& config, const SparseMatrix& ahat,
                      const PropagatedInput& input, const GraphDataset& ds, std::span<const std::size_t> nodes);

struct TrialResult {
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;  ///< 1-based epoch whose parameters were kept
    std::vector<double> train_loss;
    std::vector<double> validation_loss;  ///< empty when early stopping is off
    std::optional<PhaseMetrics> validation;
    std::optional<PhaseMetrics> test;
};

struct TrainedModel {
    ModelParams params;
    TrialResult result;
};

struct TrialSeeds {
    std::uint64_t init = 0;
    std::uint64_t dropout = 0;
};

/// Full-batch Adam on the weighted training cross-entropy. With patience set,
/// validation loss is measured after every epoch and the parameters of the
/// best epoch are returned. Throws DivergenceError on a non-finite loss.
TrainedModel fit(const ModelConfig& model, const SparseMatrix& ahat, const PropagatedInput& input,
                 std::span<const Target> train_targets, std::span<const Target> validation_targets,
                 const TrainConfig& config, const TrialSeeds& seeds);

/// Dataset-level wrapper: builds the training-phase input (or the plain
/// feature input for the standard layer), fits on the train nodes with early
/// stopping on the validation nodes, and records validation metrics.
struct TrainingRun {
    ModelConfig model;
    SparseMatrix ahat;
    TrainedModel trained;
};
TrainingRun train(const GraphDataset& ds, const SplitSpec& split, ModelConfig model, const TrainConfig& config,
                  const TrialSeeds& seeds);

/// Model config for a dataset and variant: input width follows the encoding.
ModelConfig model_config_for(const GraphDataset& ds, bool label_gcn, std::size_t hidden_dim, double dropout_rate);

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;  ///< sample standard deviation, 0 for a single value
    std::size_t n = 0;
    std::size_t skipped = 0;  ///< undefined values left out
};

/// Summary of the present values; absent ones are counted as skipped.
MetricSummary summarize(std::span<const std::optional<double>> values);
MetricSummary summarize(std::span<const double> values);

struct SweepConfig {
    SplitSizes sizes;
    std::vector<double> support_fractions{0.0, 1.0};
    std::size_t n_splits = 1;
    std::size_t n_inits = 1;
    std::uint64_t seed = 0;
    bool baseline = true;     ///< also run the plain GCN on every trial
    bool label_gcn = true;
    std::size_t hidden_dim = 16;
    double dropout_rate = 0.5;
    TrainConfig train;
    unsigned jobs = 1;
    /// Fraction of aborted trials above which the sweep counts as failed.
    double max_abort_fraction = 0.05;
};

struct SweepRow {
    std::string model;                       ///< "gcn" or "label-gcn"
    std::optional<double> support_fraction;  ///< absent for the baseline
    MetricSummary label_fraction_total;      ///< visible labels / nodes at inference
    MetricSummary accuracy;
    MetricSummary precision;                 ///< positive class; n = 0 without one
    MetricSummary recall;
    MetricSummary f1;
};

struct TrialRecord {
    std::string model;
    std::size_t split = 0;
    std::size_t init = 0;
    bool aborted = false;
    std::string abort_reason;
    TrialResult result;
    /// Test metrics per entry of SweepConfig::support_fractions (one entry for the baseline).
    std::vector<PhaseMetrics> test;
    std::vector<double> label_fraction_total;
};

struct SweepReport {
    std::string dataset;
    std::vector<SweepRow> rows;
    std::vector<TrialRecord> trials;
    std::size_t trials_aborted = 0;
    bool failed = false;  ///< too many aborted trials
};

/// Trains every split x init once per model, then scores the test set at each
/// support fraction by rebuilding the input matrix (no retraining).
SweepReport run_transductive_sweep(const GraphDataset& ds, const SweepConfig& config);

std::string sweep_csv(const SweepReport& report);
std::string sweep_json(const SweepReport& report);

enum class InductiveLabelProtocol {
    /// Every node of the step being scored has its label hidden.
    hide_scored_step,
    /// Each scored node sees all other labels up to its step; only its own is hidden.
    leave_one_out,
};

struct InductiveConfig {
    int last_train_step = 34;
    int last_step = 49;
    int shutdown_step = 43;
    std::size_t n_inits = 5;
    std::uint64_t seed = 0;
    std::size_t hidden_dim = 100;
    double dropout_rate = 0.5;
    TrainConfig train;
    InductiveLabelProtocol protocol = InductiveLabelProtocol::hide_scored_step;
    bool run_gcn = true;
    bool run_label_gcn = true;
    unsigned jobs = 1;

    /// Inductive Elliptic settings: 1000 epochs at lr 0.001, no early stopping, illicit x6.
    static InductiveConfig elliptic_defaults();
};

struct StepMetrics {
    int step = 0;
    std::size_t scored = 0;
    ConfusionCounts counts;
    PrecisionRecallF1 prf;
    double accuracy = 0.0;
};

struct InductiveRun {
    std::size_t init = 0;
    bool aborted = false;
    std::string abort_reason;
    std::vector<StepMetrics> steps;
    /// Means over test steps; steps with undefined values are skipped.
    MetricSummary precision, recall, f1, accuracy, f1_post_shutdown;
};

struct InductiveModelReport {
    std::string model;
    std::vector<InductiveRun> runs;
    /// Across initializations, of the per-run step means.
    MetricSummary precision, recall, f1, accuracy, f1_post_shutdown;
};

struct InductiveReport {
    std::vector<InductiveModelReport> models;
};

/// Trains on the subgraph of steps <= last_train_step and scores every later
/// step on the graph grown to that step. Throws DataError when the dataset has
/// no time steps, no positive class, or a step in range is empty.
InductiveReport run_inductive_elliptic(const GraphDataset& ds, const InductiveConfig& config);

/// Labels visible while scoring `scored_step` on a grown graph: every labeled
/// node except those at that step.
LabelVisibility inductive_visibility(const GraphDataset& ds, int scored_step);

/// Eval-mode class probabilities for `scored` nodes as if each node's own
/// label block were zero in `input`, with every other label unchanged.
DenseMatrix leave_one_out_probs(const ModelParams& params, const ModelConfig& config, const SparseMatrix& ahat,
                                const InputMatrix& input, std::span<const std::size_t> scored);

std::string inductive_steps_csv(const InductiveReport& report);
std::string inductive_summary_csv(const InductiveReport& report);
std::string inductive_json(const InductiveReport& report);

/// Standard split sizes and training settings per benchmark name.
struct DatasetPreset {
    SplitSizes sizes;
    std::size_t hidden_dim = 16;
    std::size_t patience = 10;
    double learning_rate = 0.01;
};
std::optional<DatasetPreset> preset_for(std::string_view dataset);

}  // namespace labelgcn
