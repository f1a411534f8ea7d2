#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "labelgcn/graph_data.hpp"
#include "labelgcn/model.hpp"
#include "labelgcn/sparse.hpp"

namespace labelgcn {

/// A small random problem for finite-difference checks.
struct GradCheckFixture {
    SparseMatrix ahat;
    InputMatrix input;
    ModelConfig config;
    ModelParams params;
    std::vector<Target> targets;
};

/// Random graph on `n` nodes, dense random features, a one-hot label block on
/// about half the nodes, and weighted targets. Dropout is off.
GradCheckFixture gradcheck_fixture(bool label_gcn, std::uint64_t seed, std::size_t n = 20);

enum class AdjointHook {
    exact,
    /// Test hook: the input gradient goes through the adjoint with the label
    /// mask complemented, which a correct check must catch.
    corrupted,
};

struct GradCheckBlock {
    std::string name;  ///< W0, W1, W2, b2 or X
    std::size_t coordinates = 0;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckBlock> blocks;
    double max_rel_error = 0.0;
};

/// Compares analytic gradients with central differences on `coords_per_block`
/// random coordinates of every parameter block and of the input X. The error
/// of a block is max |analytic - numeric| over max |numeric|.
GradCheckReport check_gradients(const GradCheckFixture& fx, std::uint64_t seed, std::size_t coords_per_block = 20,
                                double eps = 1e-5, AdjointHook hook = AdjointHook::exact);

}  // namespace labelgcn
