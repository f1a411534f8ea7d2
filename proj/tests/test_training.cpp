#include <doctest.h>

#include <json.hpp>

#include "labelgcn/error.hpp"
#include "labelgcn/training.hpp"
#include "support.hpp"

using namespace labelgcn;

namespace {

GraphDataset homophilous(std::size_t n, std::uint64_t seed) {
    testsupport::SyntheticSpec s;
    s.n = n;
    s.p_in = 0.04;
    s.p_out = 0.002;
    s.word_signal = 0.07;
    s.word_noise = 0.05;
    s.seed = seed;
    return testsupport::synthetic_dataset(s);
}

struct Fixture {
    GraphDataset ds;
    SparseMatrix ahat;
    ModelConfig model;
    PropagatedInput input;
};

Fixture ten_nodes(bool label_gcn) {
    Fixture f;
    testsupport::SyntheticSpec s;
    s.n = 10;
    s.classes = 2;
    s.words = 8;
    s.p_in = 0.5;
    s.p_out = 0.1;
    s.word_signal = 0.6;
    s.word_noise = 0.2;
    f.ds = testsupport::synthetic_dataset(s);
    f.ahat = normalize_adjacency(build_adjacency(f.ds.edges, 10));
    f.model = model_config_for(f.ds, label_gcn, 5, 0.5);
    const InputMatrix in = label_gcn ? build_input(f.ds, LabelVisibility{{0, 1, 2, 3}}) : build_feature_input(f.ds);
    f.input = propagate_input(f.model, f.ahat, in);
    return f;
}

}  // namespace

TEST_CASE("train config validation and dataset presets") {
    CHECK_NOTHROW(TrainConfig{}.validate());
    TrainConfig c;
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.patience = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.oversample_factor = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);

    const auto cora = preset_for("cora");
    REQUIRE(cora);
    CHECK(cora->sizes.total() == 140 + 140 + 273 + 2155);
    CHECK(cora->hidden_dim == 16);
    CHECK(preset_for("citeseer")->sizes.test == 332);
    CHECK(preset_for("pubmed")->sizes.train == 60);
    CHECK(preset_for("elliptic")->hidden_dim == 100);
    CHECK(preset_for("elliptic")->patience == 30);
    CHECK_FALSE(preset_for("karate"));

    const InductiveConfig e = InductiveConfig::elliptic_defaults();
    CHECK(e.train.learning_rate == 0.001);
    CHECK(e.train.max_epochs == 1000);
    CHECK_FALSE(e.train.patience);
    CHECK(e.train.oversample_factor == 6);
    CHECK(e.hidden_dim == 100);
}

TEST_CASE("adam: zero gradients, first step and a scalar reference") {
    const ModelConfig cfg{3, 2, 2, 0.5, false};
    const TrainConfig tc;
    ModelParams p = init_params(cfg, 1);
    const ModelParams start = p;
    AdamState st = AdamState::zeros(cfg);
    adam_step(p, ModelParams::zeros(cfg), st, tc);
    CHECK(p == start);
    CHECK(st.step == 1);

    // Non-zero first moment decays by beta1 under a zero gradient.
    st.m.w0(0, 0) = 0.5;
    adam_step(p, ModelParams::zeros(cfg), st, tc);
    CHECK(st.m.w0(0, 0) == 0.5 * 0.9);

    // Step one moves every coordinate by about lr in the direction of -g.
    ModelParams q = start;
    AdamState fresh = AdamState::zeros(cfg);
    ModelParams g = ModelParams::zeros(cfg);
    Rng rng(2);
    for (double& v : g.w1.data()) v = rng.uniform(0.01, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    adam_step(q, g, fresh, tc);
    for (std::size_t k = 0; k < g.w1.size(); ++k) {
        const double step = q.w1.data()[k] - start.w1.data()[k];
        CHECK(step == doctest::Approx(-0.01 * (g.w1.data()[k] > 0 ? 1.0 : -1.0)).epsilon(1e-5));
    }

    // Five steps on one coordinate against a scalar transcription of the update.
    ModelParams r = start;
    AdamState sr = AdamState::zeros(cfg);
    double x = start.b2[1], m = 0.0, v = 0.0;
    for (int t = 1; t <= 5; ++t) {
        const double grad = 0.3 * t - 1.0;
        ModelParams gr = ModelParams::zeros(cfg);
        gr.b2[1] = grad;
        adam_step(r, gr, sr, tc);
        m = 0.9 * m + 0.1 * grad;
        v = 0.999 * v + 0.001 * grad * grad;
        x -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
        CHECK(r.b2[1] == doctest::Approx(x).epsilon(1e-14));
    }

    AdamState wrong = AdamState::zeros(ModelConfig{4, 2, 2, 0.5, false});
    CHECK_THROWS_AS(adam_step(p, g, wrong, tc), DimensionError);
}

TEST_CASE("oversampling weights equal duplicated rows") {
    for (bool label_gcn : {false, true}) {
        Fixture f = ten_nodes(label_gcn);
        f.ds.positive_class = 1;
        TrainConfig tc;
        tc.oversample_class = 1;
        tc.oversample_factor = 6;
        const NodeSet nodes{0, 1, 2, 3, 4, 5};
        const auto weighted = make_targets(f.ds, nodes, tc);
        std::vector<Target> duplicated;
        for (std::size_t node : nodes) {
            const std::size_t copies = *f.ds.labels[node] == 1 ? 6 : 1;
            for (std::size_t c = 0; c < copies; ++c) duplicated.push_back(Target{node, *f.ds.labels[node], 1.0});
        }
        for (const auto& t : weighted) CHECK(t.weight == (t.cls == 1 ? 6.0 : 1.0));

        const ModelParams p = init_params(f.model, 4);
        const ForwardTrace trace = forward(p, f.model, f.ahat, f.input, Mode::train, 9);
        const auto a = loss_and_gradients(p, f.model, f.ahat, f.input, weighted, trace);
        const auto b = loss_and_gradients(p, f.model, f.ahat, f.input, duplicated, trace);
        CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-14));
        CHECK(max_abs_diff(a.grads.params.w0, b.grads.params.w0) <= 1e-15);
        CHECK(max_abs_diff(a.grads.params.w1, b.grads.params.w1) <= 1e-15);
        CHECK(max_abs_diff(a.grads.params.w2, b.grads.params.w2) <= 1e-15);

        TrainConfig plain;
        plain.patience = std::nullopt;
        plain.max_epochs = 30;
        const auto fa = fit(f.model, f.ahat, f.input, weighted, {}, plain, {1, 2});
        const auto fb = fit(f.model, f.ahat, f.input, duplicated, {}, plain, {1, 2});
        CHECK(max_abs_diff(fa.params.w0, fb.params.w0) <= 1e-10);
    }
}

TEST_CASE("early stopping halts on a worsening validation loss") {
    Fixture f = ten_nodes(true);
    f.model.dropout_rate = 0.0;
    // The validation target asks for the opposite class on the same node,
    // so every training step makes it worse.
    const std::vector<Target> train{{0, 0, 1.0}};
    const std::vector<Target> val{{0, 1, 1.0}};
    TrainConfig tc;
    tc.patience = 1;
    const TrainedModel run = fit(f.model, f.ahat, f.input, train, val, tc, {5, 6});
    REQUIRE(run.result.validation_loss.size() == 2);
    REQUIRE(run.result.validation_loss[1] > run.result.validation_loss[0]);
    CHECK(run.result.epochs_run == 2);
    CHECK(run.result.best_epoch == 1);

    TrainConfig one = tc;
    one.max_epochs = 1;
    one.patience = std::nullopt;
    CHECK(fit(f.model, f.ahat, f.input, train, val, one, {5, 6}).params == run.params);

    CHECK_THROWS_AS(fit(f.model, f.ahat, f.input, train, {}, tc, {5, 6}), std::invalid_argument);
}

TEST_CASE("train keeps the parameters of the lowest validation loss") {
    const GraphDataset ds = homophilous(200, 3);
    const SplitSpec split = sample_split(ds, SplitSizes{20, 30, 30, 100}, 1);
    for (bool label_gcn : {false, true}) {
        const TrainingRun run = train(ds, split, model_config_for(ds, label_gcn, 16, 0.5), TrainConfig{}, {7, 8});
        const auto& r = run.trained.result;
        REQUIRE(!r.validation_loss.empty());
        CHECK(r.best_epoch <= r.epochs_run);
        const double best = *std::min_element(r.validation_loss.begin(), r.validation_loss.end());
        CHECK(r.validation_loss[r.best_epoch - 1] == best);
        CHECK(r.validation->loss == best);
        CHECK(r.epochs_run <= 300);
        CHECK((r.epochs_run == 300 || r.epochs_run - r.best_epoch == 10));

        const TrainingRun again = train(ds, split, model_config_for(ds, label_gcn, 16, 0.5), TrainConfig{}, {7, 8});
        CHECK(again.trained.params == run.trained.params);
        CHECK(again.trained.result.train_loss == r.train_loss);
        CHECK(again.trained.result.validation_loss == r.validation_loss);
    }
}

TEST_CASE("divergence aborts with a dedicated error") {
    Fixture f = ten_nodes(false);
    TrainConfig tc;
    tc.learning_rate = 1e306;
    tc.patience = std::nullopt;
    tc.max_epochs = 5;
    const std::vector<Target> train{{0, 0, 1.0}, {1, 1, 1.0}};
    CHECK_THROWS_AS(fit(f.model, f.ahat, f.input, train, {}, tc, {1, 1}), DivergenceError);
}

TEST_CASE("summaries use the sample standard deviation") {
    const std::vector<double> v{1.0, 2.0, 4.0};
    const MetricSummary s = summarize(std::span<const double>(v));
    CHECK(s.mean == doctest::Approx(7.0 / 3.0));
    CHECK(s.std == doctest::Approx(std::sqrt(((16.0 + 1.0 + 25.0) / 9.0) / 2.0)));
    CHECK(s.n == 3);
    const std::vector<std::optional<double>> o{1.0, std::nullopt, 3.0};
    const MetricSummary so = summarize(std::span<const std::optional<double>>(o));
    CHECK(so.mean == 2.0);
    CHECK(so.n == 2);
    CHECK(so.skipped == 1);
    const std::vector<double> one{5.0};
    CHECK(summarize(std::span<const double>(one)).std == 0.0);
    CHECK(summarize(std::span<const double>()).n == 0);
}

TEST_CASE("sweep at fraction zero reproduces a hand-run training-phase trial") {
    const GraphDataset ds = homophilous(200, 4);
    SweepConfig sc;
    sc.sizes = SplitSizes{20, 20, 40, 100};
    sc.support_fractions = {0.0};
    sc.seed = 11;
    sc.baseline = false;
    const SweepReport rep = run_transductive_sweep(ds, sc);
    REQUIRE(rep.trials.size() == 1);

    const SplitSpec split = sample_split(ds, sc.sizes, derive_seed(11, {1, 0}));
    const TrainingRun run =
        train(ds, split, model_config_for(ds, true, 16, 0.5), sc.train,
              TrialSeeds{derive_seed(11, {2, 0, 0}), derive_seed(11, {3, 0, 0})});
    const InputMatrix in = build_input(ds, visibility_for_phase(split, Phase::training, 0.0, 0));
    const PhaseMetrics test =
        evaluate(run.trained.params, run.model, run.ahat, propagate_input(run.model, run.ahat, in), ds, split.test);
    CHECK(rep.trials[0].test[0].accuracy == test.accuracy);
    CHECK(rep.trials[0].test[0].loss == test.loss);
}

TEST_CASE("sweep on a homophilous graph: labels help and more labels help more") {
    const GraphDataset ds = homophilous(400, 5);
    SweepConfig sc;
    sc.sizes = SplitSizes{30, 30, 100, 200};
    sc.support_fractions = {0.0, 0.5, 1.0};
    sc.n_splits = 3;
    sc.n_inits = 2;
    sc.seed = 3;
    const SweepReport rep = run_transductive_sweep(ds, sc);
    REQUIRE(rep.rows.size() == 4);
    CHECK(rep.rows[0].model == "gcn");
    CHECK_FALSE(rep.rows[0].support_fraction);
    for (const auto& row : rep.rows) {
        CHECK(row.accuracy.n == 6);
        CHECK(row.accuracy.std >= 0.0);
        CHECK(row.precision.n == 0);
    }
    CHECK(rep.trials_aborted == 0);
    CHECK_FALSE(rep.failed);
    const double gcn = rep.rows[0].accuracy.mean;
    const double f0 = rep.rows[1].accuracy.mean, f5 = rep.rows[2].accuracy.mean, f1 = rep.rows[3].accuracy.mean;
    MESSAGE("gcn " << gcn << " label-gcn " << f0 << " " << f5 << " " << f1);
    CHECK(f1 > gcn);
    CHECK(f5 >= f0);
    CHECK(f1 >= f5);
    CHECK(rep.rows[3].label_fraction_total.mean == doctest::Approx(260.0 / 400.0));
    CHECK(rep.rows[1].label_fraction_total.mean == doctest::Approx(60.0 / 400.0));

    const std::string csv = sweep_csv(rep);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    const auto j = nlohmann::json::parse(sweep_json(rep));
    CHECK(j["rows"].size() == 4);
    CHECK(j["trials"].size() == 12);
}

TEST_CASE("sweep results do not depend on the worker count") {
    const GraphDataset ds = homophilous(150, 6);
    SweepConfig sc;
    sc.sizes = SplitSizes{15, 15, 30, 60};
    sc.support_fractions = {0.0, 1.0};
    sc.n_splits = 2;
    sc.n_inits = 2;
    sc.train.max_epochs = 40;
    const std::string serial = sweep_json(run_transductive_sweep(ds, sc));
    sc.jobs = 3;
    CHECK(sweep_json(run_transductive_sweep(ds, sc)) == serial);
}

TEST_CASE("a sweep where every trial diverges is reported as failed") {
    const GraphDataset ds = homophilous(80, 7);
    SweepConfig sc;
    sc.sizes = SplitSizes{10, 10, 10, 20};
    sc.train.learning_rate = 1e306;
    sc.train.max_epochs = 5;
    const SweepReport rep = run_transductive_sweep(ds, sc);
    CHECK(rep.trials_aborted == rep.trials.size());
    CHECK(rep.failed);
    CHECK(rep.rows[0].accuracy.n == 0);
    CHECK_FALSE(rep.trials[0].abort_reason.empty());
    CHECK(nlohmann::json::parse(sweep_json(rep)).is_object());
    CHECK_THROWS_AS(run_transductive_sweep(ds, SweepConfig{sc.sizes, {1.5}}), std::invalid_argument);
}

TEST_CASE("inductive visibility never includes the scored step") {
    const GraphDataset ds = testsupport::synthetic_elliptic(10, 6, 4);
    for (int step = 1; step <= 6; ++step) {
        const LabelVisibility vis = inductive_visibility(ds, step);
        for (std::size_t i = 0; i < ds.n(); ++i) {
            const bool expected = ds.labels[i].has_value() && ds.time_step[i] != step;
            CHECK(vis.contains(i) == expected);
        }
        const InputMatrix in = build_input(ds, vis);
        for (std::size_t i = 0; i < ds.n(); ++i)
            if (ds.time_step[i] == step) CHECK(in.x(i, ds.d()) == 0.0);
    }
    GraphDataset flat = ds;
    flat.time_step.clear();
    CHECK_THROWS_AS(inductive_visibility(flat, 1), DataError);
}

TEST_CASE("leave-one-out probabilities match a brute-force forward per node") {
    Rng rng(41);
    for (bool masked : {false, true}) {
        for (int trial = 0; trial < 5; ++trial) {
            GraphDataset ds = testsupport::synthetic_elliptic(12, 2, rng.next());
            const SparseMatrix ahat = normalize_adjacency(build_adjacency(ds.edges, ds.n()));
            const InputMatrix all = build_input(ds, LabelVisibility{ds.labeled_nodes()});
            ModelConfig cfg = model_config_for(ds, true, 7, 0.5);
            cfg.masked_first_layer = masked;
            const ModelParams p = init_params(cfg, rng.next());
            NodeSet scored;
            for (std::size_t i = 0; i < ds.n(); i += 3) scored.push_back(i);
            const DenseMatrix fast = leave_one_out_probs(p, cfg, ahat, all, scored);
            for (std::size_t s = 0; s < scored.size(); ++s) {
                InputMatrix own_hidden = all;
                own_hidden.x(scored[s], ds.d()) = 0.0;
                const DenseMatrix brute = forward(p, cfg, ahat, own_hidden, Mode::eval).probs;
                for (std::size_t c = 0; c < cfg.n_classes; ++c) {
                    CHECK(fast(s, c) == doctest::Approx(brute(scored[s], c)).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("inductive driver on a small time-stepped graph") {
    GraphDataset ds = testsupport::synthetic_elliptic(24, 8, 9);
    // No illicit nodes at step 8: its recall is undefined and must be skipped.
    for (std::size_t i = 0; i < ds.n(); ++i)
        if (ds.time_step[i] == 8 && ds.labels[i]) ds.labels[i] = 0;

    InductiveConfig ic = InductiveConfig::elliptic_defaults();
    ic.last_train_step = 5;
    ic.last_step = 8;
    ic.shutdown_step = 7;
    ic.n_inits = 2;
    ic.hidden_dim = 8;
    ic.train.max_epochs = 60;
    ic.train.learning_rate = 0.01;
    for (auto protocol : {InductiveLabelProtocol::hide_scored_step, InductiveLabelProtocol::leave_one_out}) {
        ic.protocol = protocol;
        const InductiveReport rep = run_inductive_elliptic(ds, ic);
        REQUIRE(rep.models.size() == 2);
        CHECK(rep.models[0].model == "gcn");
        CHECK(rep.models[1].model == "label-gcn");
        for (const auto& mr : rep.models) {
            REQUIRE(mr.runs.size() == 2);
            for (const auto& run : mr.runs) {
                REQUIRE(run.steps.size() == 3);
                CHECK(run.steps.front().step == 6);
                CHECK(run.steps.back().step == 8);
                CHECK_FALSE(run.steps.back().prf.recall.has_value());
                CHECK(run.recall.skipped >= 1);
                CHECK(run.f1_post_shutdown.n + run.f1_post_shutdown.skipped == 2);
            }
        }
        const std::string steps = inductive_steps_csv(rep);
        CHECK(std::count(steps.begin(), steps.end(), '\n') == 1 + 2 * 2 * 3);
        const std::string summary = inductive_summary_csv(rep);
        CHECK(summary.find("f1_post_shutdown_mean") != std::string::npos);
        CHECK(nlohmann::json::parse(inductive_json(rep))["models"].size() == 2);
    }

    GraphDataset gap = ds;
    for (auto& t : gap.time_step)
        if (t == 3) t = 2;
    CHECK_THROWS_AS(run_inductive_elliptic(gap, ic), DataError);
    GraphDataset flat = ds;
    flat.time_step.clear();
    CHECK_THROWS_AS(run_inductive_elliptic(flat, ic), DataError);
}
