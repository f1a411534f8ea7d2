#include "labelgcn/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>

#include "labelgcn/error.hpp"
#include "labelgcn/gradcheck.hpp"
#include "labelgcn/metrics.hpp"
#include "labelgcn/random.hpp"
#include "labelgcn/run_config.hpp"
#include "labelgcn/training.hpp"

#ifndef LABELGCN_VERSION
#define LABELGCN_VERSION "unknown"
#endif

namespace labelgcn {

namespace {

constexpr double kGradTolerance = 1e-6;

std::string dashed(std::string s) {
    std::replace(s.begin(), s.end(), '_', '-');
    return s;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f) throw UsageError("cannot write " + path.string());
}

void prepare_out(const RunConfig& rc, Command c) {
    std::error_code ec;
    std::filesystem::create_directories(rc.out, ec);
    if (ec) throw UsageError("cannot create output directory " + rc.out.string() + ": " + ec.message());
    write_file(rc.out / "manifest.txt", manifest_text(c, rc));
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json phase_json(const GraphDataset& ds, const PhaseMetrics& m) {
    nlohmann::json j{{"count", m.count}, {"loss", m.loss}, {"accuracy", m.accuracy}};
    if (ds.positive_class) {
        j["precision"] = opt_json(m.positive.precision);
        j["recall"] = opt_json(m.positive.recall);
        j["f1"] = opt_json(m.positive.f1);
    }
    return j;
}

TrainConfig train_config(const RunConfig& rc, const GraphDataset& ds) {
    TrainConfig t;
    t.learning_rate = rc.lr;
    t.max_epochs = rc.epochs;
    t.patience = rc.patience ? std::optional<std::size_t>(rc.patience) : std::nullopt;
    t.oversample_factor = rc.oversample;
    t.oversample_class = ds.positive_class;
    if (rc.oversample > 1 && !ds.positive_class) throw UsageError("oversample needs a dataset with a positive class");
    return t;
}

// Split 0, initialization 0 of a sweep with the same seed.
int cmd_train(const RunConfig& rc, std::ostream& out) {
    const GraphDataset ds = load_dataset(rc);
    prepare_out(rc, Command::train);
    const TrainConfig tc = train_config(rc, ds);
    const SplitSpec split = sample_split(ds, rc.sizes, derive_seed(rc.seed, {1, 0}));
    const TrialSeeds seeds{derive_seed(rc.seed, {2, 0, 0}), derive_seed(rc.seed, {3, 0, 0})};
    TrainingRun run = train(ds, split, model_config_for(ds, rc.label_gcn, rc.hidden, rc.dropout), tc, seeds);

    double label_fraction = 0.0;
    PropagatedInput test_input;
    if (rc.label_gcn) {
        const LabelVisibility vis =
            visibility_for_phase(split, Phase::inference, rc.support_fraction, derive_seed(rc.seed, {4, 0}));
        label_fraction = static_cast<double>(vis.visible.size()) / static_cast<double>(ds.n());
        test_input = propagate_input(run.model, run.ahat, build_input(ds, vis));
    } else {
        test_input = propagate_input(run.model, run.ahat, build_feature_input(ds));
    }
    const PhaseMetrics test = evaluate(run.trained.params, run.model, run.ahat, test_input, ds, split.test);
    const TrialResult& r = run.trained.result;

    save_checkpoint(rc.out / "model.ckpt", run.model, run.trained.params);
    nlohmann::json j{{"dataset", ds.name},
                     {"model", rc.label_gcn ? "label-gcn" : "gcn"},
                     {"epochs_run", r.epochs_run},
                     {"best_epoch", r.best_epoch},
                     {"support_fraction", rc.support_fraction},
                     {"label_fraction_total", label_fraction},
                     {"test", phase_json(ds, test)}};
    if (r.validation) j["validation"] = phase_json(ds, *r.validation);
    write_file(rc.out / "metrics.json", j.dump(2) + "\n");

    std::string curve = "epoch,train_loss,validation_loss\n";
    for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
        curve += std::to_string(e + 1) + "," + fmt(r.train_loss[e]) + "," +
                 (e < r.validation_loss.size() ? fmt(r.validation_loss[e]) : "") + "\n";
    }
    write_file(rc.out / "loss_curve.csv", curve);

    out << (rc.label_gcn ? "label-gcn" : "gcn") << " on " << ds.name << ": test accuracy " << fmt(test.accuracy)
        << " after " << r.epochs_run << " epochs (best " << r.best_epoch << ")\n";
    return exit_ok;
}

int cmd_sweep(const RunConfig& rc, std::ostream& out, std::ostream& err) {
    const GraphDataset ds = load_dataset(rc);
    prepare_out(rc, Command::sweep);
    SweepConfig sc;
    sc.sizes = rc.sizes;
    sc.support_fractions = rc.fractions;
    sc.n_splits = rc.splits;
    sc.n_inits = rc.inits;
    sc.seed = rc.seed;
    sc.baseline = rc.baseline;
    sc.hidden_dim = rc.hidden;
    sc.dropout_rate = rc.dropout;
    sc.train = train_config(rc, ds);
    sc.jobs = rc.jobs;
    const SweepReport report = run_transductive_sweep(ds, sc);
    write_file(rc.out / "sweep.csv", sweep_csv(report));
    write_file(rc.out / "sweep.json", sweep_json(report));
    for (const auto& row : report.rows) {
        out << row.model;
        if (row.support_fraction) out << " f=" << fmt(*row.support_fraction);
        out << ": accuracy " << fmt(row.accuracy.mean) << " +- " << fmt(row.accuracy.std) << " (n=" << row.accuracy.n
            << ")\n";
    }
    if (report.failed) {
        err << "sweep failed: " << report.trials_aborted << " of " << report.trials.size() << " trials diverged\n";
        return exit_divergence;
    }
    return exit_ok;
}

int cmd_inductive(const RunConfig& rc, std::ostream& out) {
    const GraphDataset ds = load_dataset(rc);
    prepare_out(rc, Command::inductive);
    InductiveConfig ic;
    ic.last_train_step = rc.last_train_step;
    ic.last_step = rc.last_step;
    ic.shutdown_step = rc.shutdown_step;
    ic.n_inits = rc.inits;
    ic.seed = rc.seed;
    ic.hidden_dim = rc.hidden;
    ic.dropout_rate = rc.dropout;
    ic.train = train_config(rc, ds);
    ic.protocol = rc.protocol;
    ic.jobs = rc.jobs;
    const InductiveReport report = run_inductive_elliptic(ds, ic);
    write_file(rc.out / "inductive_steps.csv", inductive_steps_csv(report));
    write_file(rc.out / "inductive_summary.csv", inductive_summary_csv(report));
    write_file(rc.out / "inductive.json", inductive_json(report));
    bool all_aborted = true;
    for (const auto& m : report.models) {
        out << m.model << ": F1 " << fmt(m.f1.mean) << " +- " << fmt(m.f1.std) << ", post-shutdown F1 "
            << fmt(m.f1_post_shutdown.mean) << " (n=" << m.f1.n << ")\n";
        for (const auto& run : m.runs) all_aborted = all_aborted && run.aborted;
    }
    return all_aborted ? exit_divergence : exit_ok;
}

int cmd_gradcheck(const RunConfig& rc, std::ostream& out) {
    prepare_out(rc, Command::gradcheck);
    nlohmann::json j = nlohmann::json::object();
    double worst = 0.0;
    for (const bool label : {false, true}) {
        const GradCheckFixture fx = gradcheck_fixture(label, rc.seed, rc.gradcheck_nodes);
        const GradCheckReport rep = check_gradients(fx, rc.seed, rc.gradcheck_coords, 1e-5,
                                                    rc.corrupt_adjoint ? AdjointHook::corrupted : AdjointHook::exact);
        const char* name = label ? "label-gcn" : "gcn";
        nlohmann::json blocks = nlohmann::json::array();
        for (const auto& b : rep.blocks) {
            blocks.push_back({{"block", b.name}, {"coordinates", b.coordinates}, {"max_rel_error", b.max_rel_error}});
            out << name << " " << b.name << ": " << fmt(b.max_rel_error) << "\n";
        }
        j[name] = {{"max_rel_error", rep.max_rel_error}, {"blocks", blocks}};
        worst = std::max(worst, rep.max_rel_error);
    }
    j["tolerance"] = kGradTolerance;
    j["pass"] = worst <= kGradTolerance;
    write_file(rc.out / "gradcheck.json", j.dump(2) + "\n");
    out << (worst <= kGradTolerance ? "PASS" : "FAIL") << " max relative error " << fmt(worst) << "\n";
    return worst <= kGradTolerance ? exit_ok : exit_divergence;
}

int cmd_analyze(const RunConfig& rc, std::ostream& out) {
    const GraphDataset ds = load_dataset(rc);
    prepare_out(rc, Command::analyze_labels);
    const auto avg = neighbor_label_average(ds, build_adjacency(ds.edges, ds.n()));
    write_file(rc.out / "label_histogram.csv", histogram_csv(ds, label_histogram(ds, avg, rc.bins)));

    std::string rows = "node_id,class,time_step,neighbor_label_average\n";
    std::vector<std::vector<double>> per_class(ds.n_classes());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        rows += (i < ds.node_ids.size() ? ds.node_ids[i] : std::to_string(i)) + ",";
        rows += ds.labels[i] ? ds.class_names[*ds.labels[i]] : "unknown";
        rows += "," + (ds.has_time_steps() ? std::to_string(ds.time_step[i]) : std::string()) + "," + fmt(avg[i]) +
                "\n";
        if (ds.labels[i]) per_class[*ds.labels[i]].push_back(avg[i]);
    }
    write_file(rc.out / "neighbor_label_average.csv", rows);
    for (std::size_t c = 0; c < ds.n_classes(); ++c) {
        const MetricSummary s = summarize(std::span<const double>(per_class[c]));
        out << ds.class_names[c] << ": mean neighbor label " << fmt(s.mean) << " +- " << fmt(s.std) << " over "
            << s.n << " nodes\n";
    }
    return exit_ok;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Graph convolution networks with labels as input features", "labelgcn"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(LABELGCN_VERSION));

    const std::vector<std::pair<Command, std::string>> commands{
        {Command::train, "Train one model on one split and score its test set"},
        {Command::sweep, "Repeated splits and initializations over support fractions"},
        {Command::inductive, "Temporal train/test protocol on Elliptic-style data"},
        {Command::gradcheck, "Compare analytic and finite-difference gradients"},
        {Command::analyze_labels, "Neighbor label averages and their per-class histogram"},
    };
    // Map nodes never move, so the option callbacks can keep pointers into them.
    std::map<Command, KeyValues> flags;
    std::map<Command, std::string> config_file;
    std::map<Command, CLI::App*> subs;
    for (const auto& [cmd, help] : commands) {
        CLI::App* sub = app.add_subcommand(std::string(command_name(cmd)), help);
        subs[cmd] = sub;
        KeyValues* kv = &flags[cmd];
        sub->add_option("--config", config_file[cmd], "flat key = value file; flags override it");
        for (const ConfigKey& key : config_keys(cmd)) {
            const std::string name = key.name;
            if (key.is_flag) {
                sub->add_flag_callback("--" + dashed(name), [kv, name] { (*kv)[name] = "true"; }, key.help);
                sub->add_flag_callback("--no-" + dashed(name), [kv, name] { (*kv)[name] = "false"; });
            } else {
                sub->add_option_function<std::string>(
                    "--" + dashed(name), [kv, name](const std::string& v) { (*kv)[name] = v; }, key.help);
            }
        }
    }

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::CallForVersion&) {
        out << LABELGCN_VERSION << "\n";
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "labelgcn: " << e.what() << "\n";
        return exit_usage;
    }

    try {
        for (const auto& [cmd, sub] : subs) {
            if (!sub->parsed()) continue;
            KeyValues kv = config_file[cmd].empty() ? KeyValues{} : read_config_file(config_file[cmd]);
            for (const auto& [k, v] : flags[cmd]) kv[k] = v;
            const RunConfig rc = resolve_config(cmd, kv);
            switch (cmd) {
                case Command::train: return cmd_train(rc, out);
                case Command::sweep: return cmd_sweep(rc, out, err);
                case Command::inductive: return cmd_inductive(rc, out);
                case Command::gradcheck: return cmd_gradcheck(rc, out);
                case Command::analyze_labels: return cmd_analyze(rc, out);
            }
        }
        return exit_usage;
    } catch (const UsageError& e) {
        err << "labelgcn: " << e.what() << "\n";
        return exit_usage;
    } catch (const DataError& e) {
        err << "labelgcn: data error: " << e.what() << "\n";
        return exit_data;
    } catch (const DimensionError& e) {
        err << "labelgcn: data error: " << e.what() << "\n";
        return exit_data;
    } catch (const DivergenceError& e) {
        err << "labelgcn: diverged: " << e.what() << "\n";
        return exit_divergence;
    } catch (const std::invalid_argument& e) {
        err << "labelgcn: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "labelgcn: " << e.what() << "\n";
        return exit_usage;
    }
}

}  // namespace labelgcn
