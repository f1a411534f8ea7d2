#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labelgcn/graph_data.hpp"
#include "labelgcn/sparse.hpp"

namespace labelgcn {

/// Counts for one designated positive class.
struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
    std::size_t total() const noexcept { return tp + fp + tn + fn; }
};

/// Each field is absent when its denominator is zero.
struct PrecisionRecallF1 {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

/// Fraction of exact matches. Throws std::invalid_argument on empty or
/// mismatched inputs.
double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> targets);

ConfusionCounts confusion(std::span<const std::size_t> preds, std::span<const std::size_t> targets,
                          std::size_t positive_class);

PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& counts);
PrecisionRecallF1 precision_recall_f1(std::span<const std::size_t> preds, std::span<const std::size_t> targets,
                                      std::size_t positive_class);

/// Mean of scalar-mapped neighbor labels (licit -1, unknown 0, illicit +1 for
/// Elliptic; any scalar_map dataset works) over the neighbors in the raw
/// adjacency. Isolated nodes get 0.
std::vector<double> neighbor_label_average(const GraphDataset& ds, const SparseMatrix& adjacency);

struct LabelHistogram {
    std::vector<double> bin_centers;
    /// counts[c][b]: nodes of class c whose statistic falls into bin b.
    std::vector<std::vector<std::size_t>> counts;
};

/// Per-class histogram of `values` over [-1, 1] for labeled nodes.
LabelHistogram label_histogram(const GraphDataset& ds, std::span<const double> values, std::size_t bins);

/// CSV with one bin per row: bin_center followed by one count column per class
/// (for Elliptic: bin_center,count_licit,count_illicit).
std::string histogram_csv(const GraphDataset& ds, const LabelHistogram& hist);

}  // namespace labelgcn
