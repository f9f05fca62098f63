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

#include "catelab/harness.hpp"

#include <sstream>

#include "gtest/gtest.h"

namespace catelab::harness {
namespace {

const std::string kImages = std::string(CATELAB_TEST_DATA_DIR) + "/mnist/t10k-images-idx3-ubyte.gz";
const std::string kLabels = std::string(CATELAB_TEST_DATA_DIR) + "/mnist/t10k-labels-idx1-ubyte.gz";

MethodSpec small(Learner learner, transfer::Strategy strategy = transfer::Strategy::baseline) {
    MethodSpec m = make_method(learner, strategy);
    m.transfer.regressor.network.hidden = {8, 8};
    m.transfer.regressor.train.max_iters = 60;
    m.transfer.inner_iters = 5;
    m.transfer.outer_iters = 4;
    return m;
}

SweepPlan tiny_plan() {
    SweepPlan p;
    p.dgp.kind = dgp::DgpKind::sim_lm;
    p.dgp.n_experiments = 1;
    p.methods = {small(Learner::T)};
    p.train_sizes = {60};
    p.n_seeds = 1;
    p.test_size = 40;
    p.seed = 7;
    p.jobs = 1;
    return p;
}

std::string csv(const std::vector<EvalRecord>& records) {
    std::ostringstream out;
    write_records_csv(out, records);
    return out.str();
}

TEST(CateMse, Identity) {
    const Vector tau = Vector::LinSpaced(7, -1.0, 2.0);
    EXPECT_EQ(cate_mse(tau, tau), 0.0);
}

TEST(CateMse, ConstantOffset) {
    const Vector tau = Vector::LinSpaced(9, -3.0, 3.0);
    EXPECT_NEAR(cate_mse(tau.array() + 0.1, tau), 0.01, 1e-15);
}

TEST(CateMse, HandComputedPair) {
    Vector hat(5), truth(5);
    hat << 0.3, -1.2, 2.5, 0.0, 4.1;
    truth << 0.1, -1.0, 2.0, 0.5, 3.6;
    // squared gaps 0.04, 0.04, 0.25, 0.25, 0.25
    EXPECT_NEAR(cate_mse(hat, truth), 0.166, 1e-15);
}

TEST(CateMse, RejectsEmptyAndMismatched) {
    EXPECT_THROW(cate_mse(Vector(), Vector()), Error);
    EXPECT_THROW(cate_mse(Vector::Zero(3), Vector::Zero(4)), Error);
}

TEST(Sweep, SingleCellGivesOneRecord) {
    const auto records = run_sweep(tiny_plan());
    ASSERT_EQ(records.size(), 1u);
    EXPECT_TRUE(records[0].ok()) << records[0].error;
    EXPECT_EQ(records[0].method, "T/baseline");
    EXPECT_EQ(records[0].dgp, "sim-lm");
    EXPECT_EQ(records[0].train_size, 60);
    EXPECT_EQ(records[0].mse_percent, 100.0 * records[0].mse);
}

TEST(Sweep, CardinalityIncludesErrorRows) {
    SweepPlan p = tiny_plan();
    p.dgp.n_experiments = 3;
    p.source_size = 60;
    p.methods = {small(Learner::T), small(Learner::linear_t), small(Learner::T, transfer::Strategy::warm),
                 small(Learner::group_mean)};  // no labels on sim-lm: error rows
    p.train_sizes = {50, 80};
    p.n_seeds = 3;
    const auto records = run_sweep(p);
    ASSERT_EQ(records.size(), 4u * 2u * 3u);
    for (const auto& r : records) {
        EXPECT_EQ(r.ok(), r.method != "group-mean/baseline") << r.method << ": " << r.error;
        EXPECT_EQ(r.experiment, 2);
    }
    // canonical order: method, size, seed
    EXPECT_EQ(records[0].method, "T/baseline");
    EXPECT_EQ(records[1].seed, 1);
    EXPECT_EQ(records[3].train_size, 80);
    EXPECT_EQ(records[6].method, "linear-T/baseline");
}

TEST(Sweep, TooFewUnitsIsAnErrorRow) {
    SweepPlan p = tiny_plan();
    p.dgp.n_units = 50;
    const auto records = run_sweep(p);
    ASSERT_EQ(records.size(), 1u);
    EXPECT_FALSE(records[0].ok());
    EXPECT_NE(records[0].error.find("train + test"), std::string::npos);
    EXPECT_NE(csv(records).find(",NA,NA,NA,"), std::string::npos);
}

TEST(Sweep, ZeroOracleOnZeroEffectData) {
    SweepPlan p = tiny_plan();
    p.dgp.kind = dgp::DgpKind::mnist;
    p.dgp.zero_effect = true;
    p.mnist_images = kImages;
    p.mnist_labels = kLabels;
    p.methods = {small(Learner::oracle_zero)};
    p.n_seeds = 2;
    const auto records = run_sweep(p);
    ASSERT_EQ(records.size(), 2u);
    for (const auto& r : records) {
        ASSERT_TRUE(r.ok()) << r.error;
        EXPECT_EQ(r.mse, 0.0);
    }
}

TEST(Sweep, RepeatedRunsGiveIdenticalCsv) {
    SweepPlan p = tiny_plan();
    p.dgp.n_experiments = 3;
    p.source_size = 60;
    p.methods = {small(Learner::T), small(Learner::Y), small(Learner::T, transfer::Strategy::mlrw)};
    p.n_seeds = 2;
    const std::string first = csv(run_sweep(p));
    p.jobs = 3;
    EXPECT_EQ(csv(run_sweep(p)), first);
}

TEST(Sweep, AddingAMethodLeavesOthersUnchanged) {
    SweepPlan p = tiny_plan();
    p.methods = {small(Learner::T), small(Learner::S)};
    p.n_seeds = 2;
    const auto before = run_sweep(p);
    p.methods.insert(p.methods.begin(), small(Learner::X));
    const auto after = run_sweep(p);
    ASSERT_EQ(after.size(), before.size() + 2);
    for (std::size_t i = 0; i < before.size(); ++i) {
        EXPECT_EQ(after[i + 2].method, before[i].method);
        EXPECT_EQ(after[i + 2].mse, before[i].mse);
    }
}

TEST(Sweep, DataDependOnSeedIndexNotMethod) {
    SweepPlan p = tiny_plan();
    p.methods = {small(Learner::oracle_zero)};
    p.n_seeds = 2;
    const auto a = run_sweep(p);
    p.methods = {small(Learner::T), small(Learner::oracle_zero)};
    const auto b = run_sweep(p);
    EXPECT_EQ(a[0].mse, b[2].mse);
    EXPECT_EQ(a[1].mse, b[3].mse);
    EXPECT_NE(a[0].mse, a[1].mse);
}

TEST(Plan, RejectsInvalidGrids) {
    SweepPlan p = tiny_plan();
    p.train_sizes = {100, 100};
    EXPECT_THROW(p.validate(), Error);
    p = tiny_plan();
    p.n_seeds = 0;
    EXPECT_THROW(p.validate(), Error);
    p = tiny_plan();
    p.methods = {small(Learner::X, transfer::Strategy::warm)};
    EXPECT_THROW(p.validate(), Error);
    p = tiny_plan();
    p.methods = {small(Learner::T), small(Learner::T)};
    EXPECT_THROW(p.validate(), Error);
}

TEST(Plan, JsonRoundTrip) {
    SweepPlan p = tiny_plan();
    p.methods.push_back(small(Learner::Y, transfer::Strategy::sf_reptile));
    p.methods.back().transfer.eps_per_layer = {0.2, 0.3, 0.4};
    p.dgp.zero_effect = true;
    const json j = to_json(p);
    EXPECT_EQ(to_json(plan_from_json(j)), j);
}

TEST(Plan, UnknownKeysRejected) {
    json j = to_json(tiny_plan());
    j["trian_sizes"] = {1, 2};
    EXPECT_THROW(plan_from_json(j), Error);
    j = to_json(tiny_plan());
    j["methods"][0]["hiden"] = {4};
    EXPECT_THROW(plan_from_json(j), Error);
    j = to_json(tiny_plan());
    j["dgp"]["kind"] = "sim-xx";
    EXPECT_THROW(plan_from_json(j), Error);
}

TEST(RecordsCsv, RoundTrip) {
    std::vector<EvalRecord> records{{"T/baseline", "sim-lm", 0, 100, 0, 0.25, 25.0, 1.5, ""},
                                    {"Y/mlrw", "sim-lm", 0, 100, 1, std::nan(""), std::nan(""), 0.1, "bad thing"}};
    std::istringstream in(csv(records));
    const auto back = read_records_csv(in);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].mse, 0.25);
    EXPECT_TRUE(std::isnan(back[0].wall_time_s));
    EXPECT_EQ(back[1].error, "bad thing");
    EXPECT_TRUE(std::isnan(back[1].mse));
}

EvalRecord rec(std::string method, Eigen::Index n, int seed, double mse) {
    return {std::move(method), "d", 0, n, seed, mse, 100.0 * mse, 0.0, ""};
}

TEST(Summary, SingleRecordIsItself) {
    const auto rows = summarize({rec("A", 10, 0, 0.3)});
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].median, 0.3);
    EXPECT_EQ(rows[0].q25, 0.3);
    EXPECT_EQ(rows[0].q75, 0.3);
    EXPECT_TRUE(rows[0].best);
}

TEST(Summary, TiesFlagEveryMinimizer) {
    const auto rows = summarize({rec("A", 10, 0, 0.2), rec("B", 10, 0, 0.2), rec("C", 10, 0, 0.5)});
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_TRUE(rows[0].best);
    EXPECT_TRUE(rows[1].best);
    EXPECT_FALSE(rows[2].best);
}

TEST(Summary, MedianMatchesSortedOracle) {
    Rng rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n : {1, 2, 5, 10, 11}) {
        std::vector<EvalRecord> records;
        std::vector<double> values;
        for (int s = 0; s < n; ++s) {
            values.push_back(u(rng));
            records.push_back(rec("A", 10, s, values.back()));
        }
        records.push_back({"A", "d", 0, 10, n, std::nan(""), std::nan(""), 0.0, "failed"});
        std::sort(values.begin(), values.end());
        const double oracle = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
        const auto rows = summarize(records);
        EXPECT_DOUBLE_EQ(rows[0].median, oracle);
        EXPECT_EQ(rows[0].n_ok, n);
        EXPECT_EQ(rows[0].n_failed, 1);
    }
}

TEST(Summary, TableAndPlotScript) {
    const auto rows = summarize({rec("A", 10, 0, 0.2), rec("B", 10, 0, 0.4), rec("A", 20, 0, 0.1)});
    std::ostringstream table, script;
    write_summary_table(table, rows);
    EXPECT_NE(table.str().find("20.000*"), std::string::npos);
    write_gnuplot_script(script, rows, "d", "curves.dat", "curves.png");
    EXPECT_NE(script.str().find("index 1"), std::string::npos);
    EXPECT_NE(script.str().find("'curves.dat'"), std::string::npos);
}

TEST(GroupMeans, ExactOnNoiselessLabelEffects) {
    ExperimentData d;
    d.x = Matrix::Zero(8, 1);
    d.w.resize(8);
    d.w << 0, 1, 0, 1, 0, 1, 0, 1;
    d.labels = {0, 0, 0, 0, 1, 1, 1, 1};
    d.y.resize(8);
    d.y << 1, 3, 1, 3, 5, 4, 5, 4;
    const Vector tau = GroupMeans::fit(d).predict({0, 1, 7});
    EXPECT_EQ(tau(0), 2.0);
    EXPECT_EQ(tau(1), -1.0);
    EXPECT_EQ(tau(2), 0.5);  // unseen label: pooled difference
    // two labels, each half the units with 2 + 2 per arm
    EXPECT_EQ(group_mean_variance_bound(d), 1.0);
}

TEST(CompareXy, SixSimulationsBothLearners) {
    SweepPlan p = tiny_plan();
    p.methods = {small(Learner::X)};
    const auto records = compare_xy(p);
    ASSERT_EQ(records.size(), 12u);
    const auto rows = compare_rows(records);
    ASSERT_EQ(rows.size(), 6u);
    for (int s = 0; s < 6; ++s) {
        EXPECT_EQ(rows[static_cast<std::size_t>(s)].simulation, s);
        EXPECT_NE(rows[static_cast<std::size_t>(s)].lower, "NA");
    }
}

}  // namespace
}  // namespace catelab::harness
