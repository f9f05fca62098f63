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

// Seeded sweeps: (method x train size x seed) cells over a DGP collection,
// scored by CATE MSE on held-out units of the last experiment.
//
// Every cell draws its own seed from (plan seed, method, dgp, size, seed
// index), so cells can run in any order on any number of threads and adding
// a method never disturbs the others. The data of a seed index depends only
// on the plan seed and the DGP, never on the method.

#ifndef CATELAB_HARNESS_HPP
#define CATELAB_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "catelab/common.hpp"
#include "catelab/data.hpp"
#include "catelab/dgp.hpp"
#include "catelab/learners.hpp"
#include "catelab/mnist_io.hpp"
#include "catelab/transfer.hpp"

namespace catelab::harness {

using nlohmann::json;

inline double cate_mse(const Vector& tau_hat, const Vector& tau_true) {
    require(tau_hat.size() >= 1, "cate_mse: empty input");
    require(tau_hat.size() == tau_true.size(), "cate_mse: length mismatch (" + std::to_string(tau_hat.size()) +
                                                   " vs " + std::to_string(tau_true.size()) + ")");
    return (tau_hat - tau_true).squaredNorm() / static_cast<double>(tau_hat.size());
}

// ---------------------------------------------------------------------------
// Group-mean oracle: per-label difference of arm means. Exact whenever the
// true effect depends on the label only.

class GroupMeans {
public:
    static GroupMeans fit(const ExperimentData& data) {
        require(static_cast<Eigen::Index>(data.labels.size()) == data.size(), "group means: data carries no labels");
        data.require_both_arms();
        GroupMeans g;
        std::map<int, std::array<double, 2>> sum;
        std::map<int, std::array<Eigen::Index, 2>> count;
        for (Eigen::Index i = 0; i < data.size(); ++i) {
            const int label = data.labels[static_cast<std::size_t>(i)];
            sum[label][static_cast<std::size_t>(data.w(i))] += data.y(i);
            ++count[label][static_cast<std::size_t>(data.w(i))];
        }
        const auto c = data.arm_rows(0);
        const auto t = data.arm_rows(1);
        g.fallback_ = gather(data.y, t).mean() - gather(data.y, c).mean();
        for (const auto& [label, n] : count) {
            if (n[0] == 0 || n[1] == 0) continue;  // label missing an arm: pooled difference
            g.effect_[label] = sum[label][1] / static_cast<double>(n[1]) - sum[label][0] / static_cast<double>(n[0]);
        }
        return g;
    }

    Vector predict(const std::vector<int>& labels) const {
        Vector out(static_cast<Eigen::Index>(labels.size()));
        for (std::size_t i = 0; i < labels.size(); ++i) {
            auto it = effect_.find(labels[i]);
            out(static_cast<Eigen::Index>(i)) = it == effect_.end() ? fallback_ : it->second;
        }
        return out;
    }

private:
    std::map<int, double> effect_;
    double fallback_ = 0.0;
};

/// Expected MSE of the group-mean oracle under unit-variance outcome noise:
/// sum over labels of share * (1/n_treated + 1/n_control).
inline double group_mean_variance_bound(const ExperimentData& data, double noise_variance = 1.0) {
    require(static_cast<Eigen::Index>(data.labels.size()) == data.size() && data.size() > 0,
            "group mean bound: data carries no labels");
    std::map<int, std::array<double, 2>> count;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        ++count[data.labels[static_cast<std::size_t>(i)]][static_cast<std::size_t>(data.w(i))];
    }
    double bound = 0.0;
    for (const auto& [label, n] : count) {
        require(n[0] > 0 && n[1] > 0, "group mean bound: label " + std::to_string(label) + " misses an arm");
        bound += (n[0] + n[1]) / static_cast<double>(data.size()) * (1.0 / n[0] + 1.0 / n[1]);
    }
    return noise_variance * bound;
}

// ---------------------------------------------------------------------------
// Methods

enum class Learner { S, T, X, Y, linear_t, forest_s, forest_t, oracle_zero, group_mean };

inline std::string to_string(Learner l) {
    switch (l) {
        case Learner::S: return "S";
        case Learner::T: return "T";
        case Learner::X: return "X";
        case Learner::Y: return "Y";
        case Learner::linear_t: return "linear-T";
        case Learner::forest_s: return "forest-S";
        case Learner::forest_t: return "forest-T";
        case Learner::oracle_zero: return "oracle-zero";
        case Learner::group_mean: return "group-mean";
    }
    return "?";
}

inline Learner learner_from_string(const std::string& s) {
    for (Learner l : {Learner::S, Learner::T, Learner::X, Learner::Y, Learner::linear_t, Learner::forest_s,
                      Learner::forest_t, Learner::oracle_zero, Learner::group_mean}) {
        if (to_string(l) == s) return l;
    }
    throw Error("unknown learner '" + s + "' (S, T, X, Y, linear-T, forest-S, forest-T, oracle-zero, group-mean)");
}

struct MethodSpec {
    std::string name;  // empty: "<learner>/<strategy>"
    Learner learner = Learner::T;
    /// Strategy, network and training settings. Only S, T and Y take a
    /// strategy other than baseline.
    transfer::TransferSpec transfer{};

    std::string id() const {
        return name.empty() ? to_string(learner) + "/" + transfer::to_string(transfer.strategy) : name;
    }

    bool uses_collection() const { return transfer.strategy != transfer::Strategy::baseline; }

    void validate() const {
        const std::string label = id();
        require(!label.empty() && label.find_first_of(",\"\n\r") == std::string::npos,
                "method id '" + label + "' must be non-empty without commas, quotes or newlines");
        const bool neural = learner == Learner::S || learner == Learner::T || learner == Learner::Y;
        require(neural || transfer.strategy == transfer::Strategy::baseline,
                "method '" + label + "': only S, T and Y learners take a transfer strategy");
        if (neural) transfer.validate();
    }
};

inline transfer::MetaLearner meta_learner(Learner l) {
    switch (l) {
        case Learner::S: return transfer::MetaLearner::S;
        case Learner::T: return transfer::MetaLearner::T;
        case Learner::Y: return transfer::MetaLearner::Y;
        default: throw Error("learner '" + to_string(l) + "' is not a neural meta-learner");
    }
}

inline MethodSpec make_method(Learner learner, transfer::Strategy strategy = transfer::Strategy::baseline) {
    MethodSpec m;
    m.learner = learner;
    m.transfer.strategy = strategy;
    return m;
}

// ---------------------------------------------------------------------------
// Plans and records

struct SweepPlan {
    dgp::DgpSpec dgp{.n_units = 0};  // n_units 0: sized from the grid
    std::vector<MethodSpec> methods;
    std::vector<Eigen::Index> train_sizes{100, 200, 500, 1000, 2000, 5000};
    int n_seeds = 10;
    Eigen::Index test_size = 2000;
    /// Units kept from every source experiment.
    Eigen::Index source_size = 1000;
    std::uint64_t seed = 0;
    /// Leave the evaluated experiment out of Reptile-style meta-training.
    bool hold_out_target = true;
    /// 0: hardware concurrency.
    int jobs = 0;
    std::string mnist_images;
    std::string mnist_labels;
    int mnist_pool = 4;
    /// Label used in records instead of the DGP name.
    std::string dgp_label;

    std::string dgp_id() const { return dgp_label.empty() ? dgp::to_string(dgp.kind) : dgp_label; }

    Eigen::Index max_train_size() const { return train_sizes.empty() ? 0 : train_sizes.back(); }

    /// DGP spec with n_units filled in when left at 0.
    dgp::DgpSpec resolved_dgp() const {
        dgp::DgpSpec d = dgp;
        if (d.n_units == 0) {
            d.n_units = std::max(max_train_size() + test_size, d.n_experiments > 1 ? source_size : Eigen::Index{0});
            if (d.kind == dgp::DgpKind::sim_rft) d.n_units *= 100;
        }
        return d;
    }

    int resolved_jobs() const {
        if (jobs > 0) return jobs;
        return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
    }

    void validate() const {
        require(!methods.empty(), "plan: no methods");
        require(!train_sizes.empty(), "plan: empty train-size grid");
        require(train_sizes.front() >= 2, "plan: train sizes must be >= 2");
        for (std::size_t i = 1; i < train_sizes.size(); ++i) {
            require(train_sizes[i] > train_sizes[i - 1], "plan: train sizes must be strictly increasing");
        }
        require(n_seeds >= 1, "plan: n_seeds must be >= 1");
        require(test_size >= 1, "plan: test_size must be >= 1");
        require(source_size >= 2, "plan: source_size must be >= 2");
        require(jobs >= 0, "plan: jobs must be >= 0");
        std::set<std::string> ids;
        for (const auto& m : methods) {
            m.validate();
            require(ids.insert(m.id()).second, "plan: duplicate method id '" + m.id() + "'");
        }
        const std::string label = dgp_id();
        require(label.find_first_of(",\"\n\r") == std::string::npos, "plan: dgp label must not contain commas");
        resolved_dgp().validate();
        if (dgp.kind == dgp::DgpKind::mnist) {
            require(!mnist_images.empty() && !mnist_labels.empty(), "plan: the mnist dgp needs image and label files");
        }
    }
};

struct EvalRecord {
    std::string method;
    std::string dgp;
    int experiment = 0;
    Eigen::Index train_size = 0;
    int seed = 0;
    double mse = 0.0;
    double mse_percent = 0.0;
    double wall_time_s = 0.0;
    std::string error;  // non-empty marks an error row

    bool ok() const { return error.empty(); }
};

inline std::uint64_t cell_seed(const SweepPlan& plan, const std::string& method, Eigen::Index size, int seed_index) {
    return derive_seed(plan.seed, "cell", method, plan.dgp_id(), static_cast<std::int64_t>(size), seed_index);
}

inline std::uint64_t data_seed(const SweepPlan& plan, int seed_index) {
    return derive_seed(plan.seed, "data", plan.dgp_id(), seed_index);
}

// ---------------------------------------------------------------------------
// One cell

/// Data for one seed index: sources (truncated) and the evaluated experiment.
struct SeedData {
    std::vector<ExperimentData> sources;
    ExperimentData target;
};

inline SeedData generate_seed_data(const SweepPlan& plan, int seed_index, const dgp::LabeledImages* images) {
    dgp::DgpSpec spec = plan.resolved_dgp();
    spec.seed = data_seed(plan, seed_index);
    SeedData out;
    const int last = spec.n_experiments - 1;
    for (int j = 0; j < last; ++j) {
        ExperimentData e = dgp::generate_experiment(spec, j, images);
        out.sources.push_back(e.head(std::min(plan.source_size, e.size())));
    }
    out.target = dgp::generate_experiment(spec, last, images);
    return out;
}

inline bool is_meta_learning(transfer::Strategy s) {
    return s == transfer::Strategy::sf_reptile || s == transfer::Strategy::mlrw;
}

/// One model fitted on one experiment; oracle learners have no model.
inline learners::CateModel fit_model(const MethodSpec& method, const ExperimentData& train, std::uint64_t seed) {
    require(!method.uses_collection(), "method '" + method.id() + "' needs a collection of experiments");
    learners::LearnerConfig config{method.transfer.regressor, seed};
    switch (method.learner) {
        case Learner::X: return learners::fit_x_learner(train, config);
        case Learner::linear_t:
            config.regressor.base = learners::BaseKind::linear;
            return learners::fit_t_learner(train, config);
        case Learner::forest_t:
            config.regressor.base = learners::BaseKind::forest;
            return learners::fit_t_learner(train, config);
        case Learner::forest_s:
            config.regressor.base = learners::BaseKind::forest;
            return learners::fit_s_learner(train, config);
        case Learner::oracle_zero:
        case Learner::group_mean: throw Error("learner '" + to_string(method.learner) + "' is an oracle, not a model");
        default: break;
    }
    transfer::TransferSpec spec = method.transfer;
    spec.base_learner = meta_learner(method.learner);
    spec.seed = seed;
    spec.target = 0;
    transfer::ExperimentCollection single{{train}};
    return transfer::model_for(transfer::run_transfer(single, spec), 0);
}

/// Effect estimates on `test` from a fit on `train`, the sources of `data`
/// joining in for transfer strategies.
inline Vector evaluate_tau(const MethodSpec& method, const SeedData& data, const ExperimentData& train,
                           const ExperimentData& test, std::uint64_t seed, bool hold_out_target) {
    if (method.learner == Learner::oracle_zero) return Vector::Zero(test.size());
    if (method.learner == Learner::group_mean) return GroupMeans::fit(train).predict(test.labels);
    if (!method.uses_collection()) return fit_model(method, train, seed).predict_tau(test.x);
    transfer::TransferSpec spec = method.transfer;
    spec.base_learner = meta_learner(method.learner);
    spec.seed = seed;
    transfer::ExperimentCollection c;
    c.experiments = data.sources;
    c.experiments.push_back(train);
    const std::size_t target = c.size() - 1;
    spec.source = 0;
    spec.target = target;
    if (hold_out_target && is_meta_learning(spec.strategy)) spec.holdout = {target};
    const transfer::TransferResult result = transfer::run_transfer(c, spec);
    return transfer::model_for(result, target).predict_tau(test.x);
}

inline EvalRecord run_cell(const SweepPlan& plan, const MethodSpec& method, const SeedData& data, Eigen::Index size,
                           int seed_index) {
    EvalRecord r{method.id(), plan.dgp_id(), plan.resolved_dgp().n_experiments - 1, size, seed_index};
    const auto start = std::chrono::steady_clock::now();
    try {
        const Eigen::Index n = data.target.size();
        require(n >= size + plan.test_size, "target experiment has " + std::to_string(n) + " units; need " +
                                                std::to_string(size + plan.test_size) + " (train + test)");
        const ExperimentData train = data.target.head(size);
        const ExperimentData test = data.target.rows_between(n - plan.test_size, n);
        require(test.truth.has_value(), "test units carry no ground truth");
        const Vector tau_hat = evaluate_tau(method, data, train, test, cell_seed(plan, r.method, size, seed_index),
                                            plan.hold_out_target);
        r.mse = cate_mse(tau_hat, test.truth->tau);
        require(std::isfinite(r.mse), "non-finite MSE");
        r.mse_percent = 100.0 * r.mse;
    } catch (const std::exception& e) {
        r.mse = r.mse_percent = std::numeric_limits<double>::quiet_NaN();
        r.error = e.what();
        std::replace_if(r.error.begin(), r.error.end(), [](char ch) { return ch == ',' || ch == '\n' || ch == '"'; },
                        ';');
        if (r.error.empty()) r.error = "unknown error";
    }
    r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

// ---------------------------------------------------------------------------
// Sweeps

/// Runs jobs [0, count) on `threads` workers; `fn` must be safe to call
/// concurrently for distinct indices.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(workers, count); ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) fn(i);
        });
    }
}

inline dgp::LabeledImages load_plan_images(const SweepPlan& plan) {
    return mnist::load_labeled_images(plan.mnist_images, plan.mnist_labels, plan.mnist_pool);
}

/// Records in canonical order: methods as listed, then sizes, then seeds.
inline std::vector<EvalRecord> run_sweep(const SweepPlan& plan) {
    plan.validate();
    std::optional<dgp::LabeledImages> images;
    if (plan.dgp.kind == dgp::DgpKind::mnist) images = load_plan_images(plan);
    const dgp::LabeledImages* image_ptr = images ? &*images : nullptr;
    const int jobs = plan.resolved_jobs();

    const auto n_seeds = static_cast<std::size_t>(plan.n_seeds);
    std::vector<std::optional<SeedData>> data(n_seeds);
    std::vector<std::string> data_errors(n_seeds);
    parallel_for(n_seeds, jobs, [&](std::size_t s) {
        try {
            data[s] = generate_seed_data(plan, static_cast<int>(s), image_ptr);
        } catch (const std::exception& e) {
            data_errors[s] = std::string("data generation failed: ") + e.what();
        }
    });

    const std::size_t n_sizes = plan.train_sizes.size();
    const std::size_t total = plan.methods.size() * n_sizes * n_seeds;
    std::vector<EvalRecord> records(total);
    parallel_for(total, jobs, [&](std::size_t cell) {
        const std::size_t s = cell % n_seeds;
        const std::size_t k = (cell / n_seeds) % n_sizes;
        const MethodSpec& method = plan.methods[cell / (n_seeds * n_sizes)];
        const Eigen::Index size = plan.train_sizes[k];
        if (!data[s]) {
            EvalRecord r{method.id(), plan.dgp_id(), plan.resolved_dgp().n_experiments - 1, size, static_cast<int>(s)};
            r.mse = r.mse_percent = std::numeric_limits<double>::quiet_NaN();
            r.error = data_errors[s];
            std::replace(r.error.begin(), r.error.end(), ',', ';');
            records[cell] = std::move(r);
            return;
        }
        records[cell] = run_cell(plan, method, *data[s], size, static_cast<int>(s));
    });
    return records;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kRecordHeader = "method,dgp,experiment,train_size,seed,mse,mse_percent,wall_time_s,error";

inline std::string format_metric(double v) { return std::isfinite(v) ? format_double(v) : "NA"; }

/// Wall times vary run to run; they are written only when asked for, so the
/// default file is byte-identical across runs.
inline void write_records_csv(std::ostream& out, const std::vector<EvalRecord>& records, bool with_wall_time = false) {
    out << kRecordHeader << '\n';
    for (const auto& r : records) {
        out << r.method << ',' << r.dgp << ',' << r.experiment << ',' << r.train_size << ',' << r.seed << ','
            << format_metric(r.mse) << ',' << format_metric(r.mse_percent) << ','
            << (with_wall_time ? format_double(r.wall_time_s) : std::string("NA")) << ',' << r.error << '\n';
    }
}

inline void write_timings_csv(std::ostream& out, const std::vector<EvalRecord>& records) {
    out << "method,dgp,experiment,train_size,seed,wall_time_s\n";
    for (const auto& r : records) {
        out << r.method << ',' << r.dgp << ',' << r.experiment << ',' << r.train_size << ',' << r.seed << ','
            << format_double(r.wall_time_s) << '\n';
    }
}

inline std::vector<EvalRecord> read_records_csv(std::istream& in) {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "records: empty file");
    require(line == kRecordHeader, "records: unexpected header '" + line + "'");
    std::vector<EvalRecord> out;
    auto metric = [](const std::string& s) {
        return s == "NA" ? std::numeric_limits<double>::quiet_NaN() : parse_double(s);
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = catelab::detail::split_csv_line(line);
        require(f.size() == 9, "records: expected 9 fields, got " + std::to_string(f.size()));
        EvalRecord r{f[0], f[1], std::stoi(f[2]), std::stoll(f[3]), std::stoi(f[4]), metric(f[5]), metric(f[6]),
                     metric(f[7]), f[8]};
        out.push_back(std::move(r));
    }
    return out;
}

template <class Writer>
void write_file(const std::string& path, Writer&& writer) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "cannot open '" + path + "' for writing");
    writer(out);
    require(static_cast<bool>(out), "write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Summaries

struct SummaryRow {
    std::string dgp;
    std::string method;
    Eigen::Index train_size = 0;
    int n_ok = 0;
    int n_failed = 0;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    bool best = false;  // smallest median among methods at this (dgp, size)
};

/// Median and interquartile range over seeds; rows keep the first-seen order
/// of methods and sizes.
inline std::vector<SummaryRow> summarize(const std::vector<EvalRecord>& records) {
    std::vector<SummaryRow> rows;
    std::vector<std::vector<double>> samples;
    std::map<std::tuple<std::string, std::string, Eigen::Index>, std::size_t> index;
    for (const auto& r : records) {
        auto key = std::make_tuple(r.dgp, r.method, r.train_size);
        auto [it, inserted] = index.emplace(key, rows.size());
        if (inserted) {
            rows.push_back({r.dgp, r.method, r.train_size});
            samples.emplace_back();
        }
        SummaryRow& row = rows[it->second];
        if (r.ok()) {
            ++row.n_ok;
            samples[it->second].push_back(r.mse);
        } else {
            ++row.n_failed;
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& s = samples[i];
        rows[i].median = s.empty() ? nan : median(s);
        rows[i].q25 = s.empty() ? nan : quantile(s, 0.25);
        rows[i].q75 = s.empty() ? nan : quantile(s, 0.75);
    }
    std::map<std::pair<std::string, Eigen::Index>, double> best;
    for (const auto& row : rows) {
        if (!std::isfinite(row.median)) continue;
        auto [it, inserted] = best.emplace(std::make_pair(row.dgp, row.train_size), row.median);
        if (!inserted) it->second = std::min(it->second, row.median);
    }
    for (auto& row : rows) {
        auto it = best.find({row.dgp, row.train_size});
        row.best = it != best.end() && row.median == it->second;
    }
    return rows;
}

/// Fixed-width table of median MSE (in percent) with IQR; '*' marks the
/// best median of each column.
inline void write_summary_table(std::ostream& out, const std::vector<SummaryRow>& rows) {
    std::vector<std::string> dgps, methods;
    std::vector<Eigen::Index> sizes;
    auto add_unique = [](auto& list, const auto& v) {
        if (std::find(list.begin(), list.end(), v) == list.end()) list.push_back(v);
    };
    for (const auto& r : rows) {
        add_unique(dgps, r.dgp);
        add_unique(methods, r.method);
        add_unique(sizes, r.train_size);
    }
    std::sort(sizes.begin(), sizes.end());
    auto cell_text = [](const SummaryRow& r) {
        if (r.n_ok == 0) return std::string("failed");
        std::ostringstream s;
        s.setf(std::ios::fixed);
        s.precision(3);
        s << 100.0 * r.median << (r.best ? "*" : "") << " [" << 100.0 * r.q25 << "," << 100.0 * r.q75 << "]";
        if (r.n_failed > 0) s << " (" << r.n_failed << " failed)";
        return s.str();
    };
    for (const auto& d : dgps) {
        out << "dgp " << d << ": median MSE x100 over seeds [IQR], * = best median per size\n";
        std::size_t width = 8;
        for (const auto& m : methods) width = std::max(width, m.size() + 2);
        out << std::string(width, ' ');
        for (auto n : sizes) out << "  n=" << n << std::string(n < 1000 ? 23 : 22, ' ');
        out << '\n';
        for (const auto& m : methods) {
            bool any = false;
            std::ostringstream line;
            line << m << std::string(width - m.size(), ' ');
            for (auto n : sizes) {
                auto it = std::find_if(rows.begin(), rows.end(), [&](const SummaryRow& r) {
                    return r.dgp == d && r.method == m && r.train_size == n;
                });
                std::string text = it == rows.end() ? "-" : cell_text(*it);
                any = any || it != rows.end();
                line << "  " << text << std::string(text.size() < 28 ? 28 - text.size() : 1, ' ');
            }
            if (any) out << line.str() << '\n';
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Learning-curve plots

/// Data blocks (one per method) for `index`-based plotting:
/// train_size median q25 q75, all in MSE x100.
inline void write_curve_data(std::ostream& out, const std::vector<SummaryRow>& rows, const std::string& dgp) {
    std::vector<std::string> methods;
    for (const auto& r : rows) {
        if (r.dgp == dgp && std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
            methods.push_back(r.method);
        }
    }
    for (const auto& m : methods) {
        out << "# " << m << '\n';
        for (const auto& r : rows) {
            if (r.dgp != dgp || r.method != m || r.n_ok == 0) continue;
            out << r.train_size << ' ' << format_double(100.0 * r.median) << ' ' << format_double(100.0 * r.q25) << ' '
                << format_double(100.0 * r.q75) << '\n';
        }
        out << "\n\n";
    }
}

/// Self-contained gnuplot script drawing median MSE with IQR bars against
/// the training size, one curve per method of `data_file`.
inline void write_gnuplot_script(std::ostream& out, const std::vector<SummaryRow>& rows, const std::string& dgp,
                                 const std::string& data_file, const std::string& image_file) {
    std::vector<std::string> methods;
    for (const auto& r : rows) {
        if (r.dgp == dgp && std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
            methods.push_back(r.method);
        }
    }
    out << "set terminal pngcairo size 900,600\n"
        << "set output '" << image_file << "'\n"
        << "set title 'CATE MSE vs training size (" << dgp << ", median over seeds)'\n"
        << "set xlabel 'training units'\nset ylabel 'MSE x100'\n"
        << "set logscale xy\nset key outside right\nset grid\n"
        << "plot \\\n";
    for (std::size_t i = 0; i < methods.size(); ++i) {
        out << "  '" << data_file << "' index " << i << " using 1:2:3:4 with yerrorlines title '" << methods[i] << "'"
            << (i + 1 < methods.size() ? ", \\\n" : "\n");
    }
}

// ---------------------------------------------------------------------------
// X vs Y on linear simulations

inline constexpr int kCompareSimulations = 6;

struct CompareRow {
    int simulation = 0;
    Eigen::Index train_size = 0;
    double x_median = 0.0;
    double y_median = 0.0;
    std::string lower;  // "X", "Y", "tie" or "NA"
};

/// Six single-experiment linear simulations, each with its own DGP seed,
/// swept with the X and Y learners of `base` (methods are replaced).
inline std::vector<EvalRecord> compare_xy(const SweepPlan& base) {
    std::vector<EvalRecord> all;
    for (int s = 0; s < kCompareSimulations; ++s) {
        SweepPlan plan = base;
        plan.dgp.kind = dgp::DgpKind::sim_lm;
        plan.dgp.n_experiments = 1;
        plan.dgp_label = "sim-lm-" + std::to_string(s);
        plan.seed = derive_seed(base.seed, "compare-xy", s);
        MethodSpec x = make_method(Learner::X);
        MethodSpec y = make_method(Learner::Y);
        if (!base.methods.empty()) {
            x.transfer.regressor = y.transfer.regressor = base.methods.front().transfer.regressor;
        }
        x.name = "X";
        y.name = "Y";
        plan.methods = {x, y};
        auto records = run_sweep(plan);
        all.insert(all.end(), records.begin(), records.end());
    }
    return all;
}

inline std::vector<CompareRow> compare_rows(const std::vector<EvalRecord>& records) {
    std::vector<CompareRow> out;
    const auto rows = summarize(records);
    for (const auto& r : rows) {
        if (r.method != "X") continue;
        auto y = std::find_if(rows.begin(), rows.end(), [&](const SummaryRow& o) {
            return o.method == "Y" && o.dgp == r.dgp && o.train_size == r.train_size;
        });
        CompareRow c;
        c.simulation = std::stoi(r.dgp.substr(r.dgp.rfind('-') + 1));
        c.train_size = r.train_size;
        c.x_median = r.median;
        c.y_median = y == rows.end() ? std::numeric_limits<double>::quiet_NaN() : y->median;
        if (!std::isfinite(c.x_median) || !std::isfinite(c.y_median)) c.lower = "NA";
        else if (c.x_median == c.y_median) c.lower = "tie";
        else c.lower = c.x_median < c.y_median ? "X" : "Y";
        out.push_back(c);
    }
    return out;
}

/// One row per (simulation, size): median MSE of each learner and the lower one.
inline void write_compare_csv(std::ostream& out, const std::vector<CompareRow>& rows) {
    out << "simulation,train_size,x_median_mse,y_median_mse,lower\n";
    for (const auto& r : rows) {
        out << r.simulation << ',' << r.train_size << ',' << format_metric(r.x_median) << ','
            << format_metric(r.y_median) << ',' << r.lower << '\n';
    }
}

// ---------------------------------------------------------------------------
// JSON form of plans (config files and run manifests). Unknown keys are
// rejected everywhere.

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    require(j.is_object(), where + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        const bool ok = std::any_of(known.begin(), known.end(), [&](const char* k) { return key == k; });
        require(ok, where + ": unknown key '" + key + "'");
    }
}

template <class T>
void read_key(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(std::string("config key '") + key + "': " + e.what());
    }
}

inline json to_json(const MethodSpec& m) {
    const auto& t = m.transfer;
    const auto& r = t.regressor;
    return {{"name", m.name},
            {"learner", to_string(m.learner)},
            {"strategy", transfer::to_string(t.strategy)},
            {"hidden", r.network.hidden},
            {"hidden_activation", nn::to_string(r.network.hidden_activation)},
            {"max_iters", r.train.max_iters},
            {"batch_size", r.train.batch_size},
            {"learning_rate", r.train.adam.lr},
            {"plateau_window", r.train.plateau_window},
            {"plateau_tol", r.train.plateau_tol},
            {"n_trees", r.forest.n_trees},
            {"min_leaf_size", r.forest.tree.min_leaf_size},
            {"target_iters", t.target_iters},
            {"k_frozen_layers", t.k_frozen_layers},
            {"head_from_source", t.head_from_source},
            {"shared_layers", t.shared_layers},
            {"steps_per_visit", t.steps_per_visit},
            {"eps_per_layer", t.eps_per_layer},
            {"inner_iters", t.inner_iters},
            {"outer_iters", t.outer_iters},
            {"shuffle_outer", t.shuffle_outer},
            {"adaptation_iters", t.adaptation_iters},
            {"adaptation_samples", t.adaptation_samples}};
}

inline MethodSpec method_from_json(const json& j) {
    reject_unknown_keys(j,
                        {"name", "learner", "strategy", "hidden", "hidden_activation", "max_iters", "batch_size",
                         "learning_rate", "plateau_window", "plateau_tol", "n_trees", "min_leaf_size", "target_iters",
                         "k_frozen_layers", "head_from_source", "shared_layers", "steps_per_visit", "eps_per_layer",
                         "inner_iters", "outer_iters", "shuffle_outer", "adaptation_iters", "adaptation_samples"},
                        "method");
    MethodSpec m;
    auto& t = m.transfer;
    auto& r = t.regressor;
    read_key(j, "name", m.name);
    if (j.contains("learner")) m.learner = learner_from_string(j.at("learner").get<std::string>());
    if (j.contains("strategy")) t.strategy = transfer::strategy_from_string(j.at("strategy").get<std::string>());
    read_key(j, "hidden", r.network.hidden);
    if (j.contains("hidden_activation")) {
        r.network.hidden_activation = nn::activation_from_string(j.at("hidden_activation").get<std::string>());
    }
    read_key(j, "max_iters", r.train.max_iters);
    read_key(j, "batch_size", r.train.batch_size);
    read_key(j, "learning_rate", r.train.adam.lr);
    read_key(j, "plateau_window", r.train.plateau_window);
    read_key(j, "plateau_tol", r.train.plateau_tol);
    read_key(j, "n_trees", r.forest.n_trees);
    read_key(j, "min_leaf_size", r.forest.tree.min_leaf_size);
    read_key(j, "target_iters", t.target_iters);
    read_key(j, "k_frozen_layers", t.k_frozen_layers);
    read_key(j, "head_from_source", t.head_from_source);
    read_key(j, "shared_layers", t.shared_layers);
    read_key(j, "steps_per_visit", t.steps_per_visit);
    read_key(j, "eps_per_layer", t.eps_per_layer);
    read_key(j, "inner_iters", t.inner_iters);
    read_key(j, "outer_iters", t.outer_iters);
    read_key(j, "shuffle_outer", t.shuffle_outer);
    read_key(j, "adaptation_iters", t.adaptation_iters);
    read_key(j, "adaptation_samples", t.adaptation_samples);
    return m;
}

inline json to_json(const dgp::DgpSpec& d) {
    return {{"kind", dgp::to_string(d.kind)},
            {"n_units", d.n_units},
            {"n_experiments", d.n_experiments},
            {"seed", d.seed},
            {"n_trees", d.forest.n_trees},
            {"min_leaf_size", d.forest.tree.min_leaf_size},
            {"zero_effect", d.zero_effect}};
}

inline dgp::DgpSpec dgp_from_json(const json& j, dgp::DgpSpec d = {}) {
    reject_unknown_keys(j, {"kind", "n_units", "n_experiments", "seed", "n_trees", "min_leaf_size", "zero_effect"},
                        "dgp");
    if (j.contains("kind")) d.kind = dgp::dgp_from_string(j.at("kind").get<std::string>());
    read_key(j, "n_units", d.n_units);
    read_key(j, "n_experiments", d.n_experiments);
    read_key(j, "seed", d.seed);
    read_key(j, "n_trees", d.forest.n_trees);
    read_key(j, "min_leaf_size", d.forest.tree.min_leaf_size);
    read_key(j, "zero_effect", d.zero_effect);
    return d;
}

inline json to_json(const SweepPlan& p) {
    json methods = json::array();
    for (const auto& m : p.methods) methods.push_back(to_json(m));
    return {{"dgp", to_json(p.dgp)},
            {"methods", methods},
            {"train_sizes", p.train_sizes},
            {"n_seeds", p.n_seeds},
            {"test_size", p.test_size},
            {"source_size", p.source_size},
            {"seed", p.seed},
            {"hold_out_target", p.hold_out_target},
            {"jobs", p.jobs},
            {"mnist_images", p.mnist_images},
            {"mnist_labels", p.mnist_labels},
            {"mnist_pool", p.mnist_pool}};
}

/// Keys absent from `j` keep their value in `p`.
inline SweepPlan plan_from_json(const json& j, SweepPlan p = {}) {
    reject_unknown_keys(j,
                        {"dgp", "methods", "train_sizes", "n_seeds", "test_size", "source_size", "seed",
                         "hold_out_target", "jobs", "mnist_images", "mnist_labels", "mnist_pool"},
                        "plan");
    if (j.contains("dgp")) p.dgp = dgp_from_json(j.at("dgp"), p.dgp);
    if (j.contains("methods")) {
        require(j.at("methods").is_array(), "plan: 'methods' must be an array");
        p.methods.clear();
        for (const auto& m : j.at("methods")) p.methods.push_back(method_from_json(m));
    }
    read_key(j, "train_sizes", p.train_sizes);
    read_key(j, "n_seeds", p.n_seeds);
    read_key(j, "test_size", p.test_size);
    read_key(j, "source_size", p.source_size);
    read_key(j, "seed", p.seed);
    read_key(j, "hold_out_target", p.hold_out_target);
    read_key(j, "jobs", p.jobs);
    read_key(j, "mnist_images", p.mnist_images);
    read_key(j, "mnist_labels", p.mnist_labels);
    read_key(j, "mnist_pool", p.mnist_pool);
    return p;
}

}  // namespace catelab::harness

#endif  // CATELAB_HARNESS_HPP
