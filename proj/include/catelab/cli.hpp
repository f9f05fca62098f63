/*
 * Copyright 2026 The catelab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end.
//
//   catelab simulate    write DGP experiments as columnar CSV
//   catelab fit         fit one learner on one experiment, dump effects
//   catelab sweep       run a sweep plan, write records and summaries
//   catelab compare-xy  X vs Y learner on six linear simulations
//
// Settings come from built-in defaults, then an optional JSON file
// (--config), then flags. Every run writes manifest.json to its output
// directory; passing that manifest back as --config repeats the run.

#ifndef CATELAB_CLI_HPP
#define CATELAB_CLI_HPP

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "catelab/harness.hpp"

#ifndef CATELAB_VERSION
#define CATELAB_VERSION "0.1.0"
#endif

namespace catelab::cli {

using nlohmann::json;

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot open config '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error("config '" + path + "': " + e.what());
    }
}

/// The settings object of a config file, which is either bare or a manifest
/// written by an earlier run of the same command.
inline json config_body(const json& file, const std::string& command) {
    if (file.is_object() && file.contains("command") && file.contains("config")) {
        harness::reject_unknown_keys(file, {"command", "version", "config"}, "manifest");
        require(file.at("command") == command, "manifest was written by '" + file.at("command").get<std::string>() +
                                                   "', not '" + command + "'");
        return file.at("config");
    }
    return file;
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& command, const json& config) {
    const json manifest{{"command", command}, {"version", CATELAB_VERSION}, {"config", config}};
    harness::write_file((dir / "manifest.json").string(), [&](std::ostream& out) { out << manifest.dump(2) << '\n'; });
}

inline std::filesystem::path prepare_output_dir(const std::string& dir) {
    std::filesystem::create_directories(dir);
    return dir;
}

/// "T" or "T/mlrw"; a bare learner takes `strategy`.
inline harness::MethodSpec parse_method(const std::string& text, std::optional<transfer::Strategy> strategy,
                                        harness::MethodSpec base = {}) {
    const auto slash = text.find('/');
    base.learner = harness::learner_from_string(text.substr(0, slash));
    if (slash != std::string::npos) {
        base.transfer.strategy = transfer::strategy_from_string(text.substr(slash + 1));
    } else if (strategy) {
        base.transfer.strategy = *strategy;
    }
    return base;
}

/// Flags shared by every command that trains networks; each applies only
/// when given.
struct TrainingFlags {
    std::vector<long> hidden;
    int max_iters = -1;
    int batch_size = -1;
    double learning_rate = -1.0;
    int inner_iters = -1;
    int outer_iters = -1;

    void add_to(CLI::App& app) {
        app.add_option("--hidden", hidden, "Hidden layer widths, e.g. 64,64")->delimiter(',');
        app.add_option("--max-iters", max_iters, "Training steps per network");
        app.add_option("--batch-size", batch_size, "Minibatch size");
        app.add_option("--learning-rate", learning_rate, "Adam step size");
        app.add_option("--inner-iters", inner_iters, "Reptile inner steps (and adaptation steps)");
        app.add_option("--outer-iters", outer_iters, "Reptile outer iterations");
    }

    void apply(harness::MethodSpec& m) const {
        auto& r = m.transfer.regressor;
        if (!hidden.empty()) r.network.hidden.assign(hidden.begin(), hidden.end());
        if (max_iters >= 0) r.train.max_iters = max_iters;
        if (batch_size > 0) r.train.batch_size = batch_size;
        if (learning_rate > 0) r.train.adam.lr = learning_rate;
        if (inner_iters >= 0) m.transfer.inner_iters = inner_iters;
        if (outer_iters >= 0) m.transfer.outer_iters = outer_iters;
    }
};

// ---------------------------------------------------------------------------
// simulate

struct SimulateConfig {
    dgp::DgpSpec dgp{};
    std::string mnist_images;
    std::string mnist_labels;
    int mnist_pool = 4;

    json to_json() const {
        return {{"dgp", harness::to_json(dgp)},
                {"mnist_images", mnist_images},
                {"mnist_labels", mnist_labels},
                {"mnist_pool", mnist_pool}};
    }

    static SimulateConfig from_json(const json& j) {
        harness::reject_unknown_keys(j, {"dgp", "mnist_images", "mnist_labels", "mnist_pool"}, "simulate config");
        SimulateConfig c;
        if (j.contains("dgp")) c.dgp = harness::dgp_from_json(j.at("dgp"));
        harness::read_key(j, "mnist_images", c.mnist_images);
        harness::read_key(j, "mnist_labels", c.mnist_labels);
        harness::read_key(j, "mnist_pool", c.mnist_pool);
        return c;
    }
};

/// Writes experiment_<j>.csv (with ground truth) per experiment.
inline std::vector<std::string> simulate(const SimulateConfig& config, const std::filesystem::path& dir) {
    std::optional<dgp::LabeledImages> images;
    if (config.dgp.kind == dgp::DgpKind::mnist) {
        require(!config.mnist_images.empty() && !config.mnist_labels.empty(),
                "simulate: the mnist dgp needs --mnist-images and --mnist-labels");
        images = mnist::load_labeled_images(config.mnist_images, config.mnist_labels, config.mnist_pool);
    }
    std::vector<std::string> files;
    for (int j = 0; j < config.dgp.n_experiments; ++j) {
        const ExperimentData e = dgp::generate_experiment(config.dgp, j, images ? &*images : nullptr);
        const auto path = (dir / ("experiment_" + std::to_string(j) + ".csv")).string();
        write_columnar_file(path, e);
        files.push_back(path);
    }
    return files;
}

// ---------------------------------------------------------------------------
// fit

struct FitConfig {
    std::string data;
    std::string predict;  // empty: predict on the training units
    harness::MethodSpec method{};
    std::uint64_t seed = 0;

    json to_json() const {
        return {{"data", data}, {"predict", predict}, {"method", harness::to_json(method)}, {"seed", seed}};
    }

    static FitConfig from_json(const json& j) {
        harness::reject_unknown_keys(j, {"data", "predict", "method", "seed"}, "fit config");
        FitConfig c;
        harness::read_key(j, "data", c.data);
        harness::read_key(j, "predict", c.predict);
        if (j.contains("method")) c.method = harness::method_from_json(j.at("method"));
        harness::read_key(j, "seed", c.seed);
        return c;
    }
};

inline void write_tau_dump(std::ostream& out, const Vector& tau) {
    out << "tau_hat\n";
    for (double v : tau) out << format_double(v) << '\n';
}

inline json model_summary(const learners::CateModel& model, const harness::MethodSpec& method) {
    const auto& meta = model.metadata();
    return {{"method", method.id()},
            {"kind", learners::to_string(model.kind())},
            {"covariate_width", model.width()},
            {"seed", meta.seed},
            {"train_size", meta.train_size},
            {"iterations", meta.iterations},
            {"strategy", meta.strategy}};
}

/// Fits, then writes tau_hat.csv and model.json; returns the estimates.
inline Vector fit(const FitConfig& config, const std::filesystem::path& dir) {
    require(!config.data.empty(), "fit: --data is required");
    const ExperimentData train = read_columnar_file(config.data);
    const ExperimentData query = config.predict.empty() ? train : read_columnar_file(config.predict);
    require(query.width() == train.width(), "fit: prediction data has " + std::to_string(query.width()) +
                                                " covariates, training data has " + std::to_string(train.width()));
    const learners::CateModel model = harness::fit_model(config.method, train, config.seed);
    const Vector tau = model.predict_tau(query.x);
    harness::write_file((dir / "tau_hat.csv").string(), [&](std::ostream& out) { write_tau_dump(out, tau); });
    harness::write_file((dir / "model.json").string(),
                        [&](std::ostream& out) { out << model_summary(model, config.method).dump(2) << '\n'; });
    return tau;
}

// ---------------------------------------------------------------------------
// sweep and compare-xy

struct SweepOutputs {
    std::vector<harness::EvalRecord> records;
    std::vector<harness::SummaryRow> summary;
};

inline SweepOutputs write_sweep_outputs(std::vector<harness::EvalRecord> records, const std::filesystem::path& dir,
                                        const std::string& dgp_id) {
    SweepOutputs out{std::move(records), {}};
    out.summary = harness::summarize(out.records);
    auto path = [&](const std::string& name) { return (dir / name).string(); };
    harness::write_file(path("records.csv"), [&](std::ostream& o) { harness::write_records_csv(o, out.records); });
    harness::write_file(path("timings.csv"), [&](std::ostream& o) { harness::write_timings_csv(o, out.records); });
    harness::write_file(path("summary.txt"), [&](std::ostream& o) { harness::write_summary_table(o, out.summary); });
    if (!dgp_id.empty()) {
        harness::write_file(path("curves.dat"), [&](std::ostream& o) { harness::write_curve_data(o, out.summary, dgp_id); });
        harness::write_file(path("curves.gp"), [&](std::ostream& o) {
            harness::write_gnuplot_script(o, out.summary, dgp_id, "curves.dat", "curves.png");
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Entry point

/// Runs one command line; returns the process exit code. Errors go to `err`
/// as a single line.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"catelab: CATE meta-learners, transfer strategies and seeded sweeps"};
    app.set_version_flag("--version", std::string(CATELAB_VERSION));
    app.require_subcommand(1);

    // Shared flag storage; each subcommand registers the subset it reads.
    std::string config_path, out_dir = "catelab-out", dgp_name, transfer_name, mnist_images, mnist_labels;
    std::uint64_t seed = 0;
    std::vector<std::string> methods;
    std::vector<long> train_sizes;
    int seeds = 0, jobs = -1, experiments = 0, mnist_pool = 0;
    long units = -1, test_size = 0, source_size = 0;
    bool zero_effect = false, with_wall_time = false;
    std::string data_path, predict_path;
    TrainingFlags training;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON settings or a manifest.json from an earlier run")
            ->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
        sub->add_option("--seed", seed, "Base seed");
    };
    auto dgp_flags = [&](CLI::App* sub) {
        sub->add_option("--dgp", dgp_name, "semi-synth-v1 | semi-synth-v2 | sim-lm | sim-rf | sim-rft | mnist");
        sub->add_option("--experiments", experiments, "Experiments in the collection");
        sub->add_option("--units", units, "Units per experiment (sweep: 0 sizes it from the grid)");
        sub->add_flag("--zero-effect", zero_effect, "mnist: force a zero effect for every label");
        sub->add_option("--mnist-images", mnist_images, "IDX image file (.gz accepted)");
        sub->add_option("--mnist-labels", mnist_labels, "IDX label file (.gz accepted)");
        sub->add_option("--mnist-pool", mnist_pool, "Average-pooling factor for images (1, 2, 4, 7)");
    };
    auto sweep_flags = [&](CLI::App* sub) {
        sub->add_option("--method", methods, "Learner[/strategy], repeatable: S T X Y linear-T forest-S forest-T "
                                             "oracle-zero group-mean; strategies baseline warm frozen multi-head "
                                             "joint sf-reptile mlrw");
        sub->add_option("--transfer", transfer_name, "Strategy for methods given without one");
        sub->add_option("--train-sizes", train_sizes, "Strictly increasing sizes, e.g. 100,200,500")->delimiter(',');
        sub->add_option("--seeds", seeds, "Seeds per (method, size) cell");
        sub->add_option("--test-size", test_size, "Held-out units of the evaluated experiment");
        sub->add_option("--source-size", source_size, "Units kept per source experiment");
        sub->add_option("--jobs", jobs, "Worker threads (0: all cores)");
        sub->add_flag("--wall-time", with_wall_time, "Also write records_with_time.csv, which carries wall times");
        training.add_to(*sub);
    };

    auto* simulate_cmd = app.add_subcommand("simulate", "Write DGP experiments as columnar CSV");
    common(simulate_cmd);
    dgp_flags(simulate_cmd);

    auto* fit_cmd = app.add_subcommand("fit", "Fit one learner on one experiment and dump its effect estimates");
    common(fit_cmd);
    fit_cmd->add_option("--data", data_path, "Columnar CSV of the training experiment");
    fit_cmd->add_option("--predict", predict_path, "Columnar CSV to predict on (default: the training data)");
    fit_cmd->add_option("--method", methods, "Learner: S T X Y linear-T forest-S forest-T");
    fit_cmd->add_option("--transfer", transfer_name, "Strategy (only baseline fits a single experiment)");
    training.add_to(*fit_cmd);

    auto* sweep_cmd = app.add_subcommand("sweep", "Run a sweep plan and write records, timings and summaries");
    common(sweep_cmd);
    dgp_flags(sweep_cmd);
    sweep_flags(sweep_cmd);

    auto* xy_cmd = app.add_subcommand("compare-xy", "Compare X and Y learners on six linear simulations");
    common(xy_cmd);
    sweep_flags(xy_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        CLI::App* cmd = app.get_subcommands().front();
        const std::string name = cmd->get_name();
        const json file = config_path.empty() ? json::object() : config_body(read_json_file(config_path), name);
        auto given = [&](const char* flag) {
            const CLI::Option* opt = cmd->get_option_no_throw(flag);
            return opt != nullptr && opt->count() > 0;
        };
        std::optional<transfer::Strategy> strategy;
        if (given("--transfer")) strategy = transfer::strategy_from_string(transfer_name);

        auto apply_dgp = [&](dgp::DgpSpec& d) {
            if (given("--dgp")) d.kind = dgp::dgp_from_string(dgp_name);
            if (given("--experiments")) d.n_experiments = experiments;
            if (given("--units")) d.n_units = units;
            if (given("--zero-effect")) d.zero_effect = zero_effect;
        };

        if (name == "simulate") {
            SimulateConfig c = SimulateConfig::from_json(file);
            apply_dgp(c.dgp);
            if (given("--seed")) c.dgp.seed = seed;
            if (given("--mnist-images")) c.mnist_images = mnist_images;
            if (given("--mnist-labels")) c.mnist_labels = mnist_labels;
            if (given("--mnist-pool")) c.mnist_pool = mnist_pool;
            c.dgp.validate();
            const auto dir = prepare_output_dir(out_dir);
            const auto files = simulate(c, dir);
            write_manifest(dir, name, c.to_json());
            out << "wrote " << files.size() << " experiment file(s) to " << dir.string() << '\n';
            return 0;
        }

        if (name == "fit") {
            FitConfig c = FitConfig::from_json(file);
            if (given("--data")) c.data = data_path;
            if (given("--predict")) c.predict = predict_path;
            if (given("--seed")) c.seed = seed;
            require(methods.size() <= 1, "fit: give a single --method");
            if (!methods.empty()) c.method = parse_method(methods.front(), strategy, c.method);
            else if (strategy) c.method.transfer.strategy = *strategy;
            training.apply(c.method);
            c.method.validate();
            const auto dir = prepare_output_dir(out_dir);
            const Vector tau = fit(c, dir);
            write_manifest(dir, name, c.to_json());
            out << "fitted " << c.method.id() << "; wrote " << tau.size() << " effect estimates to "
                << (dir / "tau_hat.csv").string() << '\n';
            return 0;
        }

        // sweep and compare-xy
        harness::SweepPlan plan;
        // compare-xy reads only the network settings of its first method
        plan.methods = {harness::make_method(name == "sweep" ? harness::Learner::T : harness::Learner::X)};
        plan = harness::plan_from_json(file, plan);
        if (name == "sweep") apply_dgp(plan.dgp);
        if (given("--seed")) plan.seed = seed;
        if (given("--method")) {
            plan.methods.clear();
            for (const auto& m : methods) plan.methods.push_back(parse_method(m, strategy));
        } else if (strategy) {
            for (auto& m : plan.methods) m.transfer.strategy = *strategy;
        }
        for (auto& m : plan.methods) training.apply(m);
        if (given("--train-sizes")) plan.train_sizes.assign(train_sizes.begin(), train_sizes.end());
        if (given("--seeds")) plan.n_seeds = seeds;
        if (given("--test-size")) plan.test_size = test_size;
        if (given("--source-size")) plan.source_size = source_size;
        if (given("--jobs")) plan.jobs = jobs;
        if (given("--mnist-images")) plan.mnist_images = mnist_images;
        if (given("--mnist-labels")) plan.mnist_labels = mnist_labels;
        if (given("--mnist-pool")) plan.mnist_pool = mnist_pool;
        const auto dir = prepare_output_dir(out_dir);

        if (name == "sweep") {
            plan.validate();
            write_manifest(dir, name, harness::to_json(plan));
            auto records = harness::run_sweep(plan);
            if (with_wall_time) {
                harness::write_file((dir / "records_with_time.csv").string(),
                                    [&](std::ostream& o) { harness::write_records_csv(o, records, true); });
            }
            const auto result = write_sweep_outputs(std::move(records), dir, plan.dgp_id());
            harness::write_summary_table(out, result.summary);
            const auto failed = std::count_if(result.records.begin(), result.records.end(),
                                              [](const harness::EvalRecord& r) { return !r.ok(); });
            out << result.records.size() << " records (" << failed << " failed) in " << dir.string() << '\n';
            return 0;
        }

        require(!plan.methods.empty(), "compare-xy: no method to take network settings from");
        write_manifest(dir, name, harness::to_json(plan));
        auto records = harness::compare_xy(plan);
        const auto rows = harness::compare_rows(records);
        write_sweep_outputs(std::move(records), dir, "");
        harness::write_file((dir / "compare.csv").string(), [&](std::ostream& o) { harness::write_compare_csv(o, rows); });
        int x_lower = 0, y_lower = 0;
        for (const auto& r : rows) {
            x_lower += r.lower == "X";
            y_lower += r.lower == "Y";
        }
        harness::write_compare_csv(out, rows);
        out << "lower median MSE: X in " << x_lower << ", Y in " << y_lower << " of " << rows.size()
            << " (simulation, size) cells; seed " << plan.seed << ", " << plan.n_seeds << " seeds per cell\n";
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace catelab::cli

#endif  // CATELAB_CLI_HPP
