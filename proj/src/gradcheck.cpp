#include "labelgcn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "labelgcn/random.hpp"

namespace labelgcn {

namespace {

std::vector<std::size_t> pick(std::size_t size, std::size_t count, Rng& rng) {
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(idx));
    idx.resize(std::min(size, count));
    return idx;
}

GradCheckBlock compare(std::string name, std::span<double> values, std::span<const double> analytic,
                       const std::vector<std::size_t>& coords, double eps, const std::function<double()>& loss) {
    GradCheckBlock b{std::move(name), coords.size(), 0.0};
    double diff = 0.0, scale = 0.0;
    for (std::size_t k : coords) {
        const double orig = values[k];
        values[k] = orig + eps;
        const double up = loss();
        values[k] = orig - eps;
        const double down = loss();
        values[k] = orig;
        const double numeric = (up - down) / (2.0 * eps);
        diff = std::max(diff, std::abs(analytic[k] - numeric));
        scale = std::max(scale, std::abs(numeric));
    }
    b.max_rel_error = diff / std::max(scale, 1e-12);
    return b;
}

}  // namespace

GradCheckFixture gradcheck_fixture(bool label_gcn, std::uint64_t seed, std::size_t n) {
    Rng rng(derive_seed(seed, {0x6c}));
    constexpr std::size_t d = 6, k = 3;
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.uniform() < 0.2) edges.emplace_back(i, j);

    GradCheckFixture fx;
    fx.ahat = normalize_adjacency(build_adjacency(edges, n));
    const std::size_t width = d + (label_gcn ? k : 0);
    fx.input.x = DenseMatrix(n, width);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c) fx.input.x(i, c) = rng.uniform(-1.0, 1.0);
        if (label_gcn && rng.uniform() < 0.5) fx.input.x(i, d + rng.below(k)) = 1.0;
    }
    if (label_gcn) fx.input.mask = LabelColumnMask::trailing(width, k);

    fx.config = ModelConfig{width, 8, k, 0.0, label_gcn};
    fx.params = init_params(fx.config, derive_seed(seed, {0x70}));
    for (double& b : fx.params.b2) b = rng.uniform(-0.1, 0.1);
    for (std::size_t i = 0; i < n; i += 2) {
        fx.targets.push_back(Target{i, rng.below(k), 1.0 + static_cast<double>(rng.below(3))});
    }
    return fx;
}

GradCheckReport check_gradients(const GradCheckFixture& fx, std::uint64_t seed, std::size_t coords_per_block,
                                double eps, AdjointHook hook) {
    Rng rng(derive_seed(seed, {0x6d}));
    const PropagatedInput prop = propagate_input(fx.config, fx.ahat, fx.input);
    const ForwardTrace trace = forward(fx.params, fx.config, fx.ahat, prop, Mode::eval);
    LossAndGradients lg = loss_and_gradients(fx.params, fx.config, fx.ahat, prop, fx.targets, trace, true);
    if (hook == AdjointHook::corrupted) {
        std::vector<std::size_t> flipped;
        for (std::size_t c = 0; c < fx.config.input_dim; ++c) {
            if (!fx.input.mask.contains(c)) flipped.push_back(c);
        }
        lg.grads.input = propagate_masked_adjoint(fx.ahat, *lg.grads.aggregate,
                                                  LabelColumnMask(flipped, fx.config.input_dim));
    }

    ModelParams p = fx.params;
    const auto param_loss = [&] {
        return cross_entropy(forward(p, fx.config, fx.ahat, prop, Mode::eval).probs, fx.targets);
    };
    InputMatrix x = fx.input;
    const auto input_loss = [&] {
        return cross_entropy(forward(fx.params, fx.config, fx.ahat, x, Mode::eval).probs, fx.targets);
    };

    const ModelParams& g = lg.grads.params;
    GradCheckReport r;
    r.blocks.push_back(compare("W0", p.w0.data(), g.w0.data(), pick(p.w0.size(), coords_per_block, rng), eps, param_loss));
    r.blocks.push_back(compare("W1", p.w1.data(), g.w1.data(), pick(p.w1.size(), coords_per_block, rng), eps, param_loss));
    r.blocks.push_back(compare("W2", p.w2.data(), g.w2.data(), pick(p.w2.size(), coords_per_block, rng), eps, param_loss));
    r.blocks.push_back(compare("b2", p.b2, g.b2, pick(p.b2.size(), coords_per_block, rng), eps, param_loss));
    r.blocks.push_back(compare("X", x.x.data(), lg.grads.input->data(), pick(x.x.size(), coords_per_block, rng), eps,
                               input_loss));
    for (const auto& b : r.blocks) r.max_rel_error = std::max(r.max_rel_error, b.max_rel_error);
    return r;
}

}  // namespace labelgcn
