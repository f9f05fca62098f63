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

// Quickstart: fit the four meta-learners on one simulated experiment, then
// transfer across a small collection of related experiments.

#include <iomanip>
#include <iostream>

#include "catelab/dgp.hpp"
#include "catelab/harness.hpp"
#include "catelab/learners.hpp"
#include "catelab/transfer.hpp"

using namespace catelab;

int main() {
    // One experiment with logistic-linear response surfaces on voter-style
    // covariates; the first 1000 units train, the last 1000 evaluate.
    dgp::DgpSpec spec;
    spec.kind = dgp::DgpKind::sim_lm;
    spec.n_units = 2000;
    spec.n_experiments = 6;
    spec.seed = 42;
    const auto experiments = dgp::generate_collection(spec);
    const ExperimentData& target = experiments.back();
    const ExperimentData train = target.head(1000);
    const ExperimentData test = target.rows_between(1000, 2000);

    learners::LearnerConfig config;
    config.regressor.network.hidden = {32, 32};
    config.regressor.train.max_iters = 2000;
    config.seed = 7;

    std::cout << std::fixed << std::setprecision(4);
    std::cout << "CATE MSE on 1000 held-out units (true effect variance "
              << (test.truth->tau.array() - test.truth->tau.mean()).square().mean() << ")\n";
    auto report = [&](const std::string& name, const learners::CateModel& model) {
        std::cout << "  " << std::left << std::setw(22) << name
                  << harness::cate_mse(model.predict_tau(test.x), test.truth->tau) << '\n';
    };
    report("T-learner", learners::fit_t_learner(train, config));
    report("S-learner", learners::fit_s_learner(train, config));
    report("X-learner", learners::fit_x_learner(train, config));
    report("Y-learner", learners::fit_y_learner(train, config));
    learners::LearnerConfig linear = config;
    linear.regressor.base = learners::BaseKind::linear;
    report("T-learner (linear)", learners::fit_t_learner(train, linear));

    // Transfer: five source experiments with 1000 units each, the target
    // keeps only 300 training units.
    transfer::ExperimentCollection c;
    for (std::size_t j = 0; j + 1 < experiments.size(); ++j) c.experiments.push_back(experiments[j].head(1000));
    c.experiments.push_back(target.head(300));
    const std::size_t t = c.size() - 1;

    transfer::TransferSpec ts;
    ts.regressor = config.regressor;
    ts.seed = 7;
    ts.target = t;
    ts.holdout = {t};
    ts.outer_iters = 100;
    std::cout << "\nTarget trained on 300 units, five related sources:\n";
    for (auto s : {transfer::Strategy::baseline, transfer::Strategy::warm, transfer::Strategy::frozen,
                   transfer::Strategy::mlrw}) {
        ts.strategy = s;
        const auto result = transfer::run_transfer(c, ts);
        report(transfer::to_string(s), transfer::model_for(result, t));
    }
    return 0;
}
