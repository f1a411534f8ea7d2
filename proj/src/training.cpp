#include "labelgcn/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "labelgcn/error.hpp"
#include "labelgcn/random.hpp"

namespace labelgcn {

namespace {

// Runs task(i) for i in [0, count) on up to `jobs` threads. Each task writes
// only its own output slot, so results do not depend on scheduling.
void run_parallel(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& task) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) task(i);
        });
    }
}

void adam_update(std::span<double> p, std::span<const double> g, std::span<double> m, std::span<double> v,
                 const TrainConfig& c, double correction1, double correction2) {
    for (std::size_t k = 0; k < p.size(); ++k) {
        m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
        v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
        const double m_hat = m[k] / correction1;
        const double v_hat = v[k] / correction2;
        p[k] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
}

std::vector<std::size_t> true_labels(const GraphDataset& ds, std::span<const std::size_t> nodes) {
    std::vector<std::size_t> out;
    out.reserve(nodes.size());
    for (std::size_t node : nodes) {
        if (!ds.labels[node]) throw DataError("node " + std::to_string(node) + " has no label to score against");
        out.push_back(*ds.labels[node]);
    }
    return out;
}

std::optional<double> opt_mean(const MetricSummary& s) { return s.n ? std::optional<double>(s.mean) : std::nullopt; }

nlohmann::json summary_json(const MetricSummary& s) {
    nlohmann::json j{{"n", s.n}, {"skipped", s.skipped}};
    if (s.n) {
        j["mean"] = s.mean;
        j["std"] = s.std;
    }
    return j;
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json phase_json(const PhaseMetrics& m) {
    return {{"count", m.count},
            {"loss", m.loss},
            {"accuracy", m.accuracy},
            {"tp", m.positive_counts.tp},
            {"fp", m.positive_counts.fp},
            {"tn", m.positive_counts.tn},
            {"fn", m.positive_counts.fn},
            {"precision", opt_json(m.positive.precision)},
            {"recall", opt_json(m.positive.recall)},
            {"f1", opt_json(m.positive.f1)}};
}

std::string fmt_summary(const MetricSummary& s) {
    if (!s.n) return ",,0";
    std::ostringstream os;
    os.precision(17);
    os << s.mean << ',' << s.std << ',' << s.n;
    return os.str();
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning rate must be positive");
    if (max_epochs == 0) throw std::invalid_argument("train config: max_epochs must be positive");
    if (patience && *patience == 0) throw std::invalid_argument("train config: patience must be at least 1");
    if (oversample_factor == 0) throw std::invalid_argument("train config: oversample factor must be at least 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
        throw std::invalid_argument("train config: invalid Adam constants");
    }
}

AdamState AdamState::zeros(const ModelConfig& config) {
    return AdamState{ModelParams::zeros(config), ModelParams::zeros(config), 0};
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const TrainConfig& config) {
    if (params.w0.size() != grads.w0.size() || params.w1.size() != grads.w1.size() ||
        params.w2.size() != grads.w2.size() || params.b2.size() != grads.b2.size() ||
        state.m.w0.size() != params.w0.size() || state.m.b2.size() != params.b2.size()) {
        throw DimensionError("adam_step: parameter, gradient and state shapes differ");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    adam_update(params.w0.data(), grads.w0.data(), state.m.w0.data(), state.v.w0.data(), config, c1, c2);
    adam_update(params.w1.data(), grads.w1.data(), state.m.w1.data(), state.v.w1.data(), config, c1, c2);
    adam_update(params.w2.data(), grads.w2.data(), state.m.w2.data(), state.v.w2.data(), config, c1, c2);
    adam_update(params.b2, grads.b2, state.m.b2, state.v.b2, config, c1, c2);
}

std::vector<Target> make_targets(const GraphDataset& ds, std::span<const std::size_t> nodes,
                                 const TrainConfig& config) {
    std::vector<Target> out;
    out.reserve(nodes.size());
    for (std::size_t node : nodes) {
        if (node >= ds.n() || !ds.labels[node]) throw DataError("target node without a label");
        const std::size_t cls = *ds.labels[node];
        const double w = config.oversample_class && cls == *config.oversample_class
                             ? static_cast<double>(config.oversample_factor)
                             : 1.0;
        out.push_back(Target{node, cls, w});
    }
    return out;
}

PhaseMetrics evaluate(const ModelParams& params, const ModelConfig& config, const SparseMatrix& ahat,
                      const PropagatedInput& input, const GraphDataset& ds, std::span<const std::size_t> nodes) {
    PhaseMetrics m;
    m.count = nodes.size();
    if (nodes.empty()) return m;
    const ForwardTrace trace = forward(params, config, ahat, input, Mode::eval);
    const auto targets = true_labels(ds, nodes);
    std::vector<std::size_t> preds;
    std::vector<Target> loss_targets;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        preds.push_back(argmax(trace.probs.row(nodes[k])));
        loss_targets.push_back(Target{nodes[k], targets[k], 1.0});
    }
    m.loss = cross_entropy(trace.probs, loss_targets);
    m.accuracy = accuracy(preds, targets);
    if (ds.positive_class) {
        m.positive_counts = confusion(preds, targets, *ds.positive_class);
        m.positive = precision_recall_f1(m.positive_counts);
    }
    return m;
}

TrainedModel fit(const ModelConfig& model, const SparseMatrix& ahat, const PropagatedInput& input,
                 std::span<const Target> train_targets, std::span<const Target> validation_targets,
                 const TrainConfig& config, const TrialSeeds& seeds) {
    model.validate();
    config.validate();
    if (config.patience && validation_targets.empty()) {
        throw std::invalid_argument("fit: early stopping needs validation targets");
    }

    TrainedModel out{init_params(model, seeds.init), {}};
    ModelParams params = out.params;
    AdamState state = AdamState::zeros(model);
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const ForwardTrace trace =
            forward(params, model, ahat, input, Mode::train, derive_seed(seeds.dropout, {epoch}));
        const LossAndGradients lg = loss_and_gradients(params, model, ahat, input, train_targets, trace);
        if (!std::isfinite(lg.loss)) throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch));
        adam_step(params, lg.grads.params, state, config);
        if (!params.all_finite()) throw DivergenceError("non-finite parameters at epoch " + std::to_string(epoch));
        out.result.train_loss.push_back(lg.loss);
        out.result.epochs_run = epoch;

        if (!config.patience) continue;
        const ForwardTrace eval = forward(params, model, ahat, input, Mode::eval);
        const double val_loss = cross_entropy(eval.probs, validation_targets);
        if (!std::isfinite(val_loss)) throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));
        out.result.validation_loss.push_back(val_loss);
        if (val_loss < best_loss) {
            best_loss = val_loss;
            out.params = params;
            out.result.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= *config.patience) {
            break;
        }
    }
    if (!config.patience) {
        out.params = std::move(params);
        out.result.best_epoch = out.result.epochs_run;
    }
    return out;
}

ModelConfig model_config_for(const GraphDataset& ds, bool label_gcn, std::size_t hidden_dim, double dropout_rate) {
    ModelConfig c;
    c.input_dim = ds.d() + (label_gcn ? ds.label_columns() : 0);
    c.hidden_dim = hidden_dim;
    c.n_classes = ds.n_classes();
    c.dropout_rate = dropout_rate;
    c.masked_first_layer = label_gcn;
    return c;
}

TrainingRun train(const GraphDataset& ds, const SplitSpec& split, ModelConfig model, const TrainConfig& config,
                  const TrialSeeds& seeds) {
    TrainingRun run{std::move(model), normalize_adjacency(build_adjacency(ds.edges, ds.n())), {}};
    const InputMatrix input = run.model.masked_first_layer
                                  ? build_input(ds, visibility_for_phase(split, Phase::training, 0.0, 0))
                                  : build_feature_input(ds);
    const PropagatedInput prop = propagate_input(run.model, run.ahat, input);
    const auto train_targets = make_targets(ds, split.train, config);
    const auto val_targets = make_targets(ds, split.validation, TrainConfig{});
    run.trained = fit(run.model, run.ahat, prop, train_targets, val_targets, config, seeds);
    if (!split.validation.empty()) {
        run.trained.result.validation = evaluate(run.trained.params, run.model, run.ahat, prop, ds, split.validation);
    }
    return run;
}

MetricSummary summarize(std::span<const std::optional<double>> values) {
    std::vector<double> present;
    for (const auto& v : values) {
        if (v) present.push_back(*v);
    }
    MetricSummary s = summarize(std::span<const double>(present));
    s.skipped = values.size() - present.size();
    return s;
}

MetricSummary summarize(std::span<const double> values) {
    MetricSummary s;
    s.n = values.size();
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

SweepReport run_transductive_sweep(const GraphDataset& ds, const SweepConfig& config) {
    config.train.validate();
    for (double f : config.support_fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("sweep: support fractions must lie in [0, 1]");
    }
    if (config.n_splits == 0 || config.n_inits == 0) throw std::invalid_argument("sweep: need at least one trial");

    const SparseMatrix ahat = normalize_adjacency(build_adjacency(ds.edges, ds.n()));
    const ModelConfig gcn_model = model_config_for(ds, false, config.hidden_dim, config.dropout_rate);
    const ModelConfig label_model = model_config_for(ds, true, config.hidden_dim, config.dropout_rate);
    // The plain GCN input does not depend on the split.
    const PropagatedInput gcn_input = propagate_input(gcn_model, ahat, build_feature_input(ds));

    std::vector<SplitSpec> splits;
    for (std::size_t s = 0; s < config.n_splits; ++s) {
        splits.push_back(sample_split(ds, config.sizes, derive_seed(config.seed, {1, s})));
    }

    SweepReport report;
    report.dataset = ds.name;
    for (int variant = 0; variant < 2; ++variant) {
        const bool label = variant == 1;
        if ((label && !config.label_gcn) || (!label && !config.baseline)) continue;
        for (std::size_t s = 0; s < config.n_splits; ++s) {
            for (std::size_t k = 0; k < config.n_inits; ++k) {
                TrialRecord rec;
                rec.model = label ? "label-gcn" : "gcn";
                rec.split = s;
                rec.init = k;
                report.trials.push_back(std::move(rec));
            }
        }
    }

    const double n_nodes = static_cast<double>(ds.n());
    run_parallel(report.trials.size(), config.jobs, [&](std::size_t t) {
        TrialRecord& rec = report.trials[t];
        const SplitSpec& split = splits[rec.split];
        const bool label = rec.model == "label-gcn";
        const TrialSeeds seeds{derive_seed(config.seed, {2, rec.split, rec.init}),
                               derive_seed(config.seed, {3, rec.split, rec.init})};
        const std::uint64_t vis_seed = derive_seed(config.seed, {4, rec.split});
        const ModelConfig& model = label ? label_model : gcn_model;
        try {
            const auto train_targets = make_targets(ds, split.train, config.train);
            const auto val_targets = make_targets(ds, split.validation, TrainConfig{});
            if (!label) {
                TrainedModel tm = fit(model, ahat, gcn_input, train_targets, val_targets, config.train, seeds);
                if (!split.validation.empty()) {
                    tm.result.validation = evaluate(tm.params, model, ahat, gcn_input, ds, split.validation);
                }
                rec.test.push_back(evaluate(tm.params, model, ahat, gcn_input, ds, split.test));
                tm.result.test = rec.test.back();
                rec.label_fraction_total.push_back(0.0);
                rec.result = std::move(tm.result);
                return;
            }
            const LabelVisibility train_vis = visibility_for_phase(split, Phase::training, 0.0, vis_seed);
            const PropagatedInput train_input = propagate_input(model, ahat, build_input(ds, train_vis));
            TrainedModel tm = fit(model, ahat, train_input, train_targets, val_targets, config.train, seeds);
            if (!split.validation.empty()) {
                tm.result.validation = evaluate(tm.params, model, ahat, train_input, ds, split.validation);
            }
            for (double f : config.support_fractions) {
                const LabelVisibility vis = visibility_for_phase(split, Phase::inference, f, vis_seed);
                const PropagatedInput input = propagate_input(model, ahat, build_input(ds, vis));
                rec.test.push_back(evaluate(tm.params, model, ahat, input, ds, split.test));
                rec.label_fraction_total.push_back(static_cast<double>(vis.visible.size()) / n_nodes);
            }
            tm.result.test = rec.test.back();
            rec.result = std::move(tm.result);
        } catch (const DivergenceError& e) {
            rec.aborted = true;
            rec.abort_reason = e.what();
            rec.test.clear();
        }
    });

    for (const auto& rec : report.trials) report.trials_aborted += rec.aborted;
    report.failed = static_cast<double>(report.trials_aborted) >
                    config.max_abort_fraction * static_cast<double>(report.trials.size());

    auto make_row = [&](const std::string& model, std::optional<double> fraction, std::size_t slot) {
        SweepRow row;
        row.model = model;
        row.support_fraction = fraction;
        std::vector<double> acc, total;
        std::vector<std::optional<double>> p, r, f1;
        for (const auto& rec : report.trials) {
            if (rec.model != model || rec.aborted) continue;
            const PhaseMetrics& m = rec.test[slot];
            acc.push_back(m.accuracy);
            total.push_back(rec.label_fraction_total[slot]);
            p.push_back(m.positive.precision);
            r.push_back(m.positive.recall);
            f1.push_back(m.positive.f1);
        }
        row.accuracy = summarize(std::span<const double>(acc));
        row.label_fraction_total = summarize(std::span<const double>(total));
        if (ds.positive_class) {
            row.precision = summarize(std::span<const std::optional<double>>(p));
            row.recall = summarize(std::span<const std::optional<double>>(r));
            row.f1 = summarize(std::span<const std::optional<double>>(f1));
        }
        return row;
    };
    if (config.baseline) report.rows.push_back(make_row("gcn", std::nullopt, 0));
    if (config.label_gcn) {
        for (std::size_t i = 0; i < config.support_fractions.size(); ++i) {
            report.rows.push_back(make_row("label-gcn", config.support_fractions[i], i));
        }
    }
    return report;
}

std::string sweep_csv(const SweepReport& report) {
    std::ostringstream os;
    os.precision(17);
    os << "model,support_fraction,label_fraction_total,accuracy_mean,accuracy_std,n,"
          "precision_mean,precision_std,precision_n,recall_mean,recall_std,recall_n,f1_mean,f1_std,f1_n\n";
    for (const auto& row : report.rows) {
        os << row.model << ',';
        if (row.support_fraction) os << *row.support_fraction;
        os << ',';
        if (row.support_fraction) os << row.label_fraction_total.mean;
        os << ',' << fmt_summary(row.accuracy) << ',' << fmt_summary(row.precision) << ','
           << fmt_summary(row.recall) << ',' << fmt_summary(row.f1) << '\n';
    }
    return os.str();
}

std::string sweep_json(const SweepReport& report) {
    nlohmann::json j;
    j["dataset"] = report.dataset;
    j["trials_aborted"] = report.trials_aborted;
    j["failed"] = report.failed;
    for (const auto& row : report.rows) {
        j["rows"].push_back({{"model", row.model},
                             {"support_fraction", opt_json(row.support_fraction)},
                             {"label_fraction_total", summary_json(row.label_fraction_total)},
                             {"accuracy", summary_json(row.accuracy)},
                             {"precision", summary_json(row.precision)},
                             {"recall", summary_json(row.recall)},
                             {"f1", summary_json(row.f1)}});
    }
    for (const auto& rec : report.trials) {
        nlohmann::json t{{"model", rec.model},
                         {"split", rec.split},
                         {"init", rec.init},
                         {"aborted", rec.aborted},
                         {"epochs_run", rec.result.epochs_run},
                         {"best_epoch", rec.result.best_epoch}};
        if (rec.aborted) t["abort_reason"] = rec.abort_reason;
        if (rec.result.validation) t["validation"] = phase_json(*rec.result.validation);
        for (std::size_t i = 0; i < rec.test.size(); ++i) {
            nlohmann::json m = phase_json(rec.test[i]);
            m["label_fraction_total"] = rec.label_fraction_total[i];
            t["test"].push_back(std::move(m));
        }
        j["trials"].push_back(std::move(t));
    }
    return j.dump(2);
}

InductiveConfig InductiveConfig::elliptic_defaults() {
    InductiveConfig c;
    c.train.learning_rate = 0.001;
    c.train.max_epochs = 1000;
    c.train.patience = std::nullopt;
    c.train.oversample_factor = 6;
    return c;
}

LabelVisibility inductive_visibility(const GraphDataset& ds, int scored_step) {
    if (!ds.has_time_steps()) throw DataError("inductive visibility needs per-node time steps");
    LabelVisibility vis;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        if (ds.labels[i] && ds.time_step[i] != scored_step) vis.visible.push_back(i);
    }
    return vis;
}

DenseMatrix leave_one_out_probs(const ModelParams& params, const ModelConfig& config, const SparseMatrix& ahat,
                                const InputMatrix& input, std::span<const std::size_t> scored) {
    const PropagatedInput prop = propagate_input(config, ahat, input);
    const ForwardTrace trace = forward(params, config, ahat, prop, Mode::eval);
    const std::size_t h = config.hidden_dim;
    const std::size_t k = config.n_classes;
    const auto label_cols = input.mask.columns();

    DenseMatrix out(scored.size(), k);
    std::vector<double> own(h), agg(h), pre(h);
    for (std::size_t s = 0; s < scored.size(); ++s) {
        const std::size_t i = scored[s];
        if (i >= ahat.rows()) throw DimensionError("leave_one_out_probs: node outside graph");
        // Contribution of node i's own label block to any first-layer row, per unit of Ahat.
        std::fill(own.begin(), own.end(), 0.0);
        for (std::size_t c : label_cols) {
            const double x = input.x(i, c);
            if (x == 0.0) continue;
            for (std::size_t j = 0; j < h; ++j) own[j] += x * params.w0(c, j);
        }
        std::fill(agg.begin(), agg.end(), 0.0);
        const auto cols = ahat.row_cols(i);
        const auto vals = ahat.row_values(i);
        for (std::size_t e = 0; e < cols.size(); ++e) {
            const std::size_t u = cols[e];
            const double a = vals[e];
            // The masked layer never lets row i see its own label.
            const double remove = (config.masked_first_layer && u == i) ? 0.0 : a;
            for (std::size_t j = 0; j < h; ++j) {
                const double v = trace.pre1(u, j) - remove * own[j];
                agg[j] += a * (v > 0.0 ? v : 0.0);
            }
        }
        std::fill(pre.begin(), pre.end(), 0.0);
        for (std::size_t q = 0; q < h; ++q) {
            if (agg[q] == 0.0) continue;
            for (std::size_t j = 0; j < h; ++j) pre[j] += agg[q] * params.w1(q, j);
        }
        auto row = out.row(s);
        for (std::size_t c = 0; c < k; ++c) row[c] = params.b2[c];
        for (std::size_t q = 0; q < h; ++q) {
            const double v = pre[q] > 0.0 ? pre[q] : 0.0;
            if (v == 0.0) continue;
            for (std::size_t c = 0; c < k; ++c) row[c] += v * params.w2(q, c);
        }
        const double top = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - top);
            sum += v;
        }
        for (double& v : row) v /= sum;
    }
    return out;
}

InductiveReport run_inductive_elliptic(const GraphDataset& ds, const InductiveConfig& config) {
    if (!ds.has_time_steps()) throw DataError("inductive evaluation needs per-node time steps");
    if (!ds.positive_class) throw DataError("inductive evaluation needs a positive class");
    if (config.last_train_step >= config.last_step) throw std::invalid_argument("inductive: no test steps");
    for (int step = 1; step <= config.last_step; ++step) {
        if (std::find(ds.time_step.begin(), ds.time_step.end(), step) == ds.time_step.end()) {
            throw DataError("time step " + std::to_string(step) + " has no nodes");
        }
    }

    auto nodes_up_to = [&](int step) {
        NodeSet out;
        for (std::size_t i = 0; i < ds.n(); ++i) {
            if (ds.time_step[i] <= step) out.push_back(i);
        }
        return out;
    };

    TrainConfig train_cfg = config.train;
    train_cfg.oversample_class = ds.positive_class;
    train_cfg.validate();

    const GraphDataset train_ds = induced_subgraph(ds, nodes_up_to(config.last_train_step));
    const SparseMatrix train_ahat = normalize_adjacency(build_adjacency(train_ds.edges, train_ds.n()));
    const NodeSet train_nodes = train_ds.labeled_nodes();
    if (train_nodes.empty()) throw DataError("inductive: no labeled training nodes");
    const auto targets = make_targets(train_ds, train_nodes, train_cfg);

    struct Job {
        bool label;
        std::size_t init;
        ModelConfig model;
        std::optional<ModelParams> params;
        std::string abort_reason;
    };
    std::vector<Job> jobs;
    for (int variant = 0; variant < 2; ++variant) {
        const bool label = variant == 1;
        if ((label && !config.run_label_gcn) || (!label && !config.run_gcn)) continue;
        for (std::size_t k = 0; k < config.n_inits; ++k) {
            jobs.push_back(Job{label, k, model_config_for(ds, label, config.hidden_dim, config.dropout_rate), {}, {}});
        }
    }

    const LabelVisibility train_vis{train_nodes};
    run_parallel(jobs.size(), config.jobs, [&](std::size_t j) {
        Job& job = jobs[j];
        const InputMatrix input = job.label ? build_input(train_ds, train_vis) : build_feature_input(train_ds);
        const PropagatedInput prop = propagate_input(job.model, train_ahat, input);
        const TrialSeeds seeds{derive_seed(config.seed, {10, job.init}), derive_seed(config.seed, {11, job.init})};
        try {
            job.params = fit(job.model, train_ahat, prop, targets, {}, train_cfg, seeds).params;
        } catch (const DivergenceError& e) {
            job.abort_reason = e.what();
        }
    });

    std::vector<std::vector<StepMetrics>> steps(jobs.size());
    for (int step = config.last_train_step + 1; step <= config.last_step; ++step) {
        const GraphDataset sub = induced_subgraph(ds, nodes_up_to(step));
        const SparseMatrix ahat = normalize_adjacency(build_adjacency(sub.edges, sub.n()));
        NodeSet scored;
        for (std::size_t i = 0; i < sub.n(); ++i) {
            if (sub.labels[i] && sub.time_step[i] == step) scored.push_back(i);
        }
        const auto truth = true_labels(sub, scored);
        const InputMatrix features = build_feature_input(sub);
        const InputMatrix labels_hidden = build_input(sub, inductive_visibility(sub, step));
        const InputMatrix labels_all = build_input(sub, LabelVisibility{sub.labeled_nodes()});

        run_parallel(jobs.size(), config.jobs, [&](std::size_t j) {
            const Job& job = jobs[j];
            if (!job.params) return;
            DenseMatrix probs;
            if (!job.label) {
                probs = forward(*job.params, job.model, ahat, features, Mode::eval).probs.gather_rows(scored);
            } else if (config.protocol == InductiveLabelProtocol::hide_scored_step) {
                probs = forward(*job.params, job.model, ahat, labels_hidden, Mode::eval).probs.gather_rows(scored);
            } else {
                probs = leave_one_out_probs(*job.params, job.model, ahat, labels_all, scored);
            }
            StepMetrics m;
            m.step = step;
            m.scored = scored.size();
            std::vector<std::size_t> preds;
            for (std::size_t r = 0; r < probs.rows(); ++r) preds.push_back(argmax(probs.row(r)));
            if (!preds.empty()) m.accuracy = accuracy(preds, truth);
            m.counts = confusion(preds, truth, *ds.positive_class);
            m.prf = precision_recall_f1(m.counts);
            steps[j].push_back(m);
        });
    }

    InductiveReport report;
    for (int variant = 0; variant < 2; ++variant) {
        const std::string name = variant == 1 ? "label-gcn" : "gcn";
        InductiveModelReport mr;
        mr.model = name;
        std::vector<double> p, r, f, a, fp;
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (jobs[j].label != (variant == 1)) continue;
            InductiveRun run;
            run.init = jobs[j].init;
            run.aborted = !jobs[j].params;
            run.abort_reason = jobs[j].abort_reason;
            run.steps = steps[j];
            std::vector<std::optional<double>> sp, sr, sf, sa, sfp;
            for (const auto& m : run.steps) {
                sp.push_back(m.prf.precision);
                sr.push_back(m.prf.recall);
                sf.push_back(m.prf.f1);
                sa.push_back(m.scored ? std::optional<double>(m.accuracy) : std::nullopt);
                if (m.step >= config.shutdown_step) sfp.push_back(m.prf.f1);
            }
            run.precision = summarize(std::span<const std::optional<double>>(sp));
            run.recall = summarize(std::span<const std::optional<double>>(sr));
            run.f1 = summarize(std::span<const std::optional<double>>(sf));
            run.accuracy = summarize(std::span<const std::optional<double>>(sa));
            run.f1_post_shutdown = summarize(std::span<const std::optional<double>>(sfp));
            if (!run.aborted) {
                for (auto [vec, s] : {std::pair{&p, &run.precision}, std::pair{&r, &run.recall}, std::pair{&f, &run.f1},
                                      std::pair{&a, &run.accuracy}, std::pair{&fp, &run.f1_post_shutdown}}) {
                    if (const auto v = opt_mean(*s)) vec->push_back(*v);
                }
            }
            mr.runs.push_back(std::move(run));
        }
        if (mr.runs.empty()) continue;
        mr.precision = summarize(std::span<const double>(p));
        mr.recall = summarize(std::span<const double>(r));
        mr.f1 = summarize(std::span<const double>(f));
        mr.accuracy = summarize(std::span<const double>(a));
        mr.f1_post_shutdown = summarize(std::span<const double>(fp));
        report.models.push_back(std::move(mr));
    }
    return report;
}

std::string inductive_steps_csv(const InductiveReport& report) {
    std::ostringstream os;
    os.precision(17);
    os << "model,init,step,scored,tp,fp,tn,fn,precision,recall,f1,accuracy\n";
    auto opt = [](const std::optional<double>& v) {
        std::ostringstream s;
        s.precision(17);
        if (v) s << *v;
        return s.str();
    };
    for (const auto& mr : report.models) {
        for (const auto& run : mr.runs) {
            for (const auto& m : run.steps) {
                os << mr.model << ',' << run.init << ',' << m.step << ',' << m.scored << ',' << m.counts.tp << ','
                   << m.counts.fp << ',' << m.counts.tn << ',' << m.counts.fn << ',' << opt(m.prf.precision) << ','
                   << opt(m.prf.recall) << ',' << opt(m.prf.f1) << ',' << m.accuracy << '\n';
            }
        }
    }
    return os.str();
}

std::string inductive_summary_csv(const InductiveReport& report) {
    std::ostringstream os;
    os << "model,precision_mean,precision_std,precision_n,recall_mean,recall_std,recall_n,f1_mean,f1_std,f1_n,"
          "f1_post_shutdown_mean,f1_post_shutdown_std,f1_post_shutdown_n,accuracy_mean,accuracy_std,accuracy_n\n";
    for (const auto& mr : report.models) {
        os << mr.model << ',' << fmt_summary(mr.precision) << ',' << fmt_summary(mr.recall) << ','
           << fmt_summary(mr.f1) << ',' << fmt_summary(mr.f1_post_shutdown) << ',' << fmt_summary(mr.accuracy)
           << '\n';
    }
    return os.str();
}

std::string inductive_json(const InductiveReport& report) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& mr : report.models) {
        nlohmann::json m{{"model", mr.model},
                         {"precision", summary_json(mr.precision)},
                         {"recall", summary_json(mr.recall)},
                         {"f1", summary_json(mr.f1)},
                         {"f1_post_shutdown", summary_json(mr.f1_post_shutdown)},
                         {"accuracy", summary_json(mr.accuracy)}};
        for (const auto& run : mr.runs) {
            nlohmann::json r{{"init", run.init},
                             {"aborted", run.aborted},
                             {"precision", summary_json(run.precision)},
                             {"recall", summary_json(run.recall)},
                             {"f1", summary_json(run.f1)},
                             {"f1_post_shutdown", summary_json(run.f1_post_shutdown)},
                             {"accuracy", summary_json(run.accuracy)}};
            if (run.aborted) r["abort_reason"] = run.abort_reason;
            for (const auto& s : run.steps) {
                r["steps"].push_back({{"step", s.step},
                                      {"scored", s.scored},
                                      {"tp", s.counts.tp},
                                      {"fp", s.counts.fp},
                                      {"tn", s.counts.tn},
                                      {"fn", s.counts.fn},
                                      {"precision", opt_json(s.prf.precision)},
                                      {"recall", opt_json(s.prf.recall)},
                                      {"f1", opt_json(s.prf.f1)},
                                      {"accuracy", s.accuracy}});
            }
            m["runs"].push_back(std::move(r));
        }
        j["models"].push_back(std::move(m));
    }
    return j.dump(2);
}

std::optional<DatasetPreset> preset_for(std::string_view dataset) {
    if (dataset == "cora") return DatasetPreset{{140, 140, 273, 2155}, 16, 10, 0.01};
    if (dataset == "citeseer") return DatasetPreset{{120, 120, 332, 2740}, 16, 10, 0.01};
    if (dataset == "pubmed") return DatasetPreset{{60, 60, 1973, 17624}, 16, 10, 0.01};
    if (dataset == "elliptic") return DatasetPreset{{4656, 4656, 9314, 27938}, 100, 30, 0.01};
    return std::nullopt;
}

}  // namespace labelgcn
