#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "labelgcn/dense.hpp"
#include "labelgcn/sparse.hpp"

namespace labelgcn {

enum class LabelEncoding {
    one_hot,     ///< K label columns, one-hot rows.
    scalar_map,  ///< one label column holding a per-class scalar (Elliptic: licit -1, illicit +1).
};

using NodeSet = std::vector<std::size_t>;

struct GraphDataset {
    std::string name;
    std::vector<std::string> node_ids;
    DenseMatrix features;                          ///< n x d
    std::vector<std::optional<std::size_t>> labels;  ///< absent = unknown
    std::vector<std::string> class_names;          ///< index = class id
    std::vector<Edge> edges;                       ///< dense node indices, as read
    std::vector<int> time_step;                    ///< empty, or one entry per node
    LabelEncoding label_encoding = LabelEncoding::one_hot;
    /// scalar_map only: value written into the label column for each class.
    std::vector<double> class_scalars;
    /// Class treated as positive for precision/recall (Elliptic: illicit).
    std::optional<std::size_t> positive_class;
    /// Edges dropped at load because an endpoint was not a known node.
    std::size_t dropped_edges = 0;

    std::size_t n() const noexcept { return features.rows(); }
    std::size_t d() const noexcept { return features.cols(); }
    std::size_t n_classes() const noexcept { return class_names.size(); }
    std::size_t label_columns() const noexcept {
        return label_encoding == LabelEncoding::one_hot ? n_classes() : 1;
    }
    bool has_time_steps() const noexcept { return !time_step.empty(); }
    NodeSet labeled_nodes() const;

    /// Throws DataError if any invariant is broken.
    void validate() const;
};

struct SplitSizes {
    std::size_t train = 0;
    std::size_t validation = 0;
    std::size_t test = 0;
    std::size_t support = 0;
    std::size_t total() const noexcept { return train + validation + test + support; }
};

struct SplitSpec {
    NodeSet train;
    NodeSet validation;
    NodeSet test;
    NodeSet support;
};

enum class Phase { training, inference };

struct LabelVisibility {
    NodeSet visible;  ///< sorted
    bool contains(std::size_t node) const;
};

struct InputMatrix {
    DenseMatrix x;          ///< n x (d + label columns)
    LabelColumnMask mask;   ///< the label block
};

/// Tab-separated citation layout: `<id> <f_1..f_d> <class>` per content
/// line and `<cited> <citing>` per cites line. Nodes keep file order and
/// classes are numbered in lexicographic order of their names.
GraphDataset load_citation(const std::filesystem::path& content_path, const std::filesystem::path& cites_path,
                           std::string name = "citation");

/// Elliptic CSV triple. The time step is kept per node and also as the first
/// feature column, so d = 166 for the full data.
GraphDataset load_elliptic(const std::filesystem::path& features_csv, const std::filesystem::path& classes_csv,
                           const std::filesystem::path& edgelist_csv);

/// Disjoint uniform sample of labeled nodes. Deterministic for a fixed seed.
SplitSpec sample_split(const GraphDataset& ds, const SplitSizes& sizes, std::uint64_t seed);

/// Training phase: train + validation. Inference phase: additionally
/// round(fraction * |support|) support nodes, taken as a prefix of a
/// seed-fixed permutation so larger fractions reveal supersets. Test nodes
/// never appear. Throws std::invalid_argument for fractions outside [0, 1].
LabelVisibility visibility_for_phase(const SplitSpec& split, Phase phase, double support_fraction,
                                     std::uint64_t seed);

/// Features followed by the label block; labels of nodes outside `vis` (or
/// unknown labels) are encoded as zeros.
InputMatrix build_input(const GraphDataset& ds, const LabelVisibility& vis);

/// Features only, with an empty mask. The input of a plain GCN.
InputMatrix build_feature_input(const GraphDataset& ds);

/// Divides every feature row by its sum (rows summing to zero are left as is).
void row_normalize_features(GraphDataset& ds);

/// Restriction to `nodes` (kept in the given order): features, labels,
/// time steps, and edges with both endpoints inside.
GraphDataset induced_subgraph(const GraphDataset& ds, const NodeSet& nodes);

}  // namespace labelgcn
