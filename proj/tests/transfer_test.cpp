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

#include "catelab/transfer.hpp"

#include "gradient_check.hpp"
#include "gtest/gtest.h"

namespace catelab::transfer {
namespace {

using testing::random_matrix;
using testing::random_vector;

/// mu0 = x.beta + offset, mu1 = mu0 + effect; beta shared across experiments.
ExperimentData make_experiment(Eigen::Index n, double offset, double effect, std::uint64_t seed, double noise = 0.0) {
    Rng beta_rng(77);
    const Vector beta = random_vector(3, beta_rng);
    Rng rng(seed);
    ExperimentData e;
    e.x = random_matrix(n, 3, rng);
    e.w.resize(n);
    e.y.resize(n);
    std::normal_distribution<double> eps(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        e.w(i) = static_cast<int>(i % 2);
        e.y(i) = e.x.row(i).dot(beta) + offset + (e.w(i) == 1 ? effect : 0.0) + noise * eps(rng);
    }
    return e;
}

ExperimentCollection make_collection(std::size_t count, Eigen::Index n = 60) {
    ExperimentCollection c;
    for (std::size_t i = 0; i < count; ++i) {
        c.experiments.push_back(make_experiment(n, 0.2 * static_cast<double>(i), 1.0, 100 + i, 0.1));
    }
    return c;
}

TransferSpec small_spec(Strategy s, int iters = 40) {
    TransferSpec spec;
    spec.strategy = s;
    spec.regressor.network.hidden = {8, 8};
    spec.regressor.train.max_iters = iters;
    spec.regressor.train.batch_size = 16;
    spec.inner_iters = 5;
    spec.outer_iters = 6;
    spec.adaptation_samples = 0;
    spec.seed = 3;
    return spec;
}

Matrix probe_points() {
    Rng rng(999);
    return random_matrix(20, 3, rng);
}

TEST(Baseline, SingleExperimentEqualsLearnerFit) {
    const auto c = make_collection(1);
    for (MetaLearner kind : {MetaLearner::S, MetaLearner::T, MetaLearner::Y}) {
        auto spec = small_spec(Strategy::baseline);
        spec.base_learner = kind;
        const auto result = run_transfer(c, spec);
        const auto direct = learners::fit_neural(kind, c.experiments[0], {spec.regressor, spec.seed});
        EXPECT_EQ(model_for(result, 0).predict_tau(probe_points()), direct.predict_tau(probe_points()));
    }
}

TEST(Baseline, OtherExperimentsNeverPerturbAFit) {
    const auto small = make_collection(2);
    auto large = small;
    large.experiments.push_back(make_experiment(60, 5.0, -1.0, 555));
    const auto spec = small_spec(Strategy::baseline);
    const auto a = run_transfer(small, spec);
    const auto b = run_transfer(large, spec);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(model_for(a, i).predict_tau(probe_points()), model_for(b, i).predict_tau(probe_points()));
    }
}

TEST(Baseline, IdenticalExperimentsGiveIdenticalModels) {
    ExperimentCollection c;
    c.experiments = {make_experiment(50, 0.0, 1.0, 5), make_experiment(50, 0.0, 1.0, 5)};
    const auto r = run_transfer(c, small_spec(Strategy::baseline));
    EXPECT_EQ(model_for(r, 0).predict_tau(probe_points()), model_for(r, 1).predict_tau(probe_points()));
}

TEST(Collection, RejectsMismatchedWidthAndEmptyExperiments) {
    auto c = make_collection(2);
    c.experiments[1].x = Matrix::Zero(60, 4);
    EXPECT_THROW(run_transfer(c, small_spec(Strategy::baseline)), Error);
    EXPECT_THROW(run_transfer(make_collection(1), small_spec(Strategy::warm)), Error);
    ExperimentCollection empty;
    EXPECT_THROW(run_transfer(empty, small_spec(Strategy::baseline)), Error);
}

TEST(WarmStart, ZeroTargetStepsReturnsSourceModel) {
    const auto c = make_collection(2);
    auto spec = small_spec(Strategy::warm);
    spec.target_iters = 0;
    const auto run = warm_start(c, spec);
    const auto src = learners::to_cate_model(run.source, {});
    EXPECT_EQ(model_for(run_transfer(c, spec), 1).predict_tau(probe_points()), src.predict_tau(probe_points()));
}

TEST(WarmStart, IgnoringSourceReproducesBaseline) {
    const auto c = make_collection(3);
    auto spec = small_spec(Strategy::warm);
    spec.target = 2;
    spec.ignore_source = true;
    const auto warm = run_transfer(c, spec);
    spec.strategy = Strategy::baseline;
    const auto base = run_transfer(c, spec);
    EXPECT_EQ(model_for(warm, 2).predict_tau(probe_points()), model_for(base, 2).predict_tau(probe_points()));
}

TEST(WarmStart, IdenticalSourceReachesPlateauNoLaterThanBaseline) {
    int warm_wins = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ExperimentCollection c;
        c.experiments = {make_experiment(200, 0.0, 1.0, 40 + seed, 0.5), make_experiment(200, 0.0, 1.0, 40 + seed, 0.5)};
        auto spec = small_spec(Strategy::warm, 5000);
        spec.regressor.train.plateau_window = 100;
        spec.regressor.train.plateau_tol = 1e-3;
        spec.seed = seed;
        const auto run = warm_start(c, spec);
        Rng rng(derive_seed(seed, "baseline-steps"));
        auto fresh = learners::make_neural_learner(
            MetaLearner::T, 3, spec.regressor, learners::default_scales(MetaLearner::T, c.experiments[1].y, spec.regressor),
            rng);
        const int baseline_steps = learners::train_neural_learner(fresh, c.experiments[1], spec.regressor.train, rng);
        if (run.target_iterations <= baseline_steps) ++warm_wins;
    }
    EXPECT_EQ(warm_wins, 5);
}

TEST(Frozen, LowerLayersAreBitIdenticalAfterTraining) {
    const auto c = make_collection(2);
    for (int k : {1, 2}) {
        auto spec = small_spec(Strategy::frozen);
        spec.k_frozen_layers = k;
        const auto run = frozen_features(c, spec);
        for (std::size_t r = 0; r < run.source.chains.size(); ++r) {
            const auto front = nn::split_network(run.source.pool.at(run.source.chains[r].front()).net,
                                                 static_cast<std::size_t>(k))
                                   .first;
            const auto& target_front = run.target.pool.at(run.target.chains[r][0]);
            EXPECT_TRUE(target_front.frozen);
            EXPECT_TRUE(target_front.net == front);
            EXPECT_EQ(target_front.adam.step_count, 0);
            EXPECT_GT(run.target.pool.at(run.target.chains[r][1]).adam.step_count, 0);
        }
    }
}

TEST(Frozen, RejectsSplitOutOfRange) {
    const auto c = make_collection(2);
    auto spec = small_spec(Strategy::frozen);
    for (int k : {0, 3}) {
        spec.k_frozen_layers = k;
        EXPECT_THROW(run_transfer(c, spec), Error);
    }
}

TEST(Frozen, HeadTrajectoryMatchesTrainingOnCachedFeatures) {
    const auto c = make_collection(2);
    auto spec = small_spec(Strategy::frozen, 30);
    const auto run = frozen_features(c, spec);

    // Replay: heads alone, trained on z = front(x) with the same generator.
    const ExperimentData& target = c.experiments[1];
    NeuralLearner heads;
    heads.kind = MetaLearner::T;
    heads.scales = run.source.scales;
    ExperimentData cached = target;
    for (std::size_t r = 0; r < 2; ++r) {
        const auto [front, back] = nn::split_network(run.source.pool.at(run.source.chains[r].front()).net, 2);
        heads.chains.push_back({heads.pool.add(back, {})});
        // Both arms share the same covariates, so one cache per role would
        // differ; only the role's own arm rows are ever fed to its head.
        if (r == 0) cached.x = nn::forward_batch(front, target.x);
    }
    // The two roles have different fronts; replay role 0 only on its features.
    heads.covariate_width = cached.x.cols();
    const auto front1 = nn::split_network(run.source.pool.at(run.source.chains[1].front()).net, 2).first;
    const Matrix z1 = nn::forward_batch(front1, target.x);

    Rng rng(derive_seed(spec.seed, "frozen-target", std::size_t{1}));
    const learners::ArmRows arms(target);
    GradientAccumulator acc(2);
    for (int t = 0; t < 30; ++t) {
        const auto r0 = training::sample_rows(arms.control, 16, rng);
        const auto r1 = training::sample_rows(arms.treated, 16, rng);
        training::accumulate_chain_mse(heads.pool, heads.chains[0], gather_rows(cached.x, r0),
                                       heads.scales[0].to_model(gather(target.y, r0)), acc);
        training::accumulate_chain_mse(heads.pool, heads.chains[1], gather_rows(z1, r1),
                                       heads.scales[1].to_model(gather(target.y, r1)), acc);
        acc.apply(heads.pool);
    }
    EXPECT_TRUE(heads.pool.at(0).net == run.target.pool.at(run.target.chains[0][1]).net);
    EXPECT_TRUE(heads.pool.at(1).net == run.target.pool.at(run.target.chains[1][1]).net);
}

TEST(MultiHead, StepOnOneExperimentLeavesOtherHeadsUntouched) {
    const auto c = make_collection(3);
    auto spec = small_spec(Strategy::multi_head);
    Rng rng(1);
    SharedLearners s = build_shared(c, spec, false, rng);
    const BlockPool before = s.learner.pool;
    GradientAccumulator acc(s.learner.pool.size());
    const learners::ArmRows arms(c.experiments[1]);
    learners::accumulate_learner_step(s.view(1), c.experiments[1], arms, 16, rng, acc);
    acc.apply(s.learner.pool);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t r = 0; r < 2; ++r) {
            const auto head = s.chains[i][r][1];
            EXPECT_EQ(s.learner.pool.at(head).net == before.at(head).net, i != 1) << "experiment " << i;
        }
    }
    for (std::size_t r = 0; r < 2; ++r) {
        const auto base = s.chains[0][r][0];
        EXPECT_FALSE(s.learner.pool.at(base).net == before.at(base).net);
    }
}

TEST(MultiHead, SingleExperimentIsTwoBlockBaseline) {
    const auto c = make_collection(1);
    const auto r = run_transfer(c, small_spec(Strategy::multi_head));
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(model_for(r, 0).parts()[0].network().chain.size(), 2u);
    EXPECT_TRUE(model_for(r, 0).predict_tau(probe_points()).allFinite());
}

TEST(MultiHead, IdenticalExperimentsGiveNearIdenticalHeads) {
    // Arm-constant responses, which every head can represent exactly.
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto e = make_experiment(100, 0.0, 0.0, 60 + seed);
        for (Eigen::Index i = 0; i < e.size(); ++i) e.y(i) = e.w(i) == 1 ? 1.5 : 0.5;
        ExperimentCollection c;
        c.experiments = {e, e};
        auto spec = small_spec(Strategy::multi_head, 10000);
        spec.seed = seed;
        const auto r = run_transfer(c, spec);
        Rng grid_rng(seed);
        const Matrix grid = random_matrix(50, 3, grid_rng);
        const Vector diff = model_for(r, 0).predict_tau(grid) - model_for(r, 1).predict_tau(grid);
        EXPECT_LE(diff.cwiseAbs().maxCoeff(), 0.05) << "seed " << seed;
    }
}

TEST(Joint, InitialLossIsSumOfHeadLosses) {
    const auto c = make_collection(3, 12);
    auto spec = small_spec(Strategy::joint);
    Rng rng(2);
    SharedLearners s = build_shared(c, spec, true, rng);
    std::vector<learners::ArmRows> arms;
    for (const auto& e : c.experiments) arms.emplace_back(e);
    GradientAccumulator acc(s.learner.pool.size());
    const double joint = accumulate_joint_step(s, c, arms, 64, rng, acc);
    double separate = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& e = c.experiments[i];
        for (int arm : {0, 1}) {
            const auto rows = e.arm_rows(arm);
            const Vector pred = training::predict_chain(s.learner.pool, s.chains[i][static_cast<std::size_t>(arm)],
                                                        gather_rows(e.x, rows));
            separate += nn::loss_mse(pred, s.learner.scales[0].to_model(gather(e.y, rows)));
        }
    }
    EXPECT_NEAR(joint, separate, 1e-12);
    // One shared lower block for every head.
    EXPECT_EQ(s.chains[0][0][0], s.chains[2][1][0]);
}

TEST(Joint, SummedGradientMatchesFiniteDifferences) {
    const auto c = make_collection(2, 6);
    auto spec = small_spec(Strategy::joint);
    spec.regressor.network.hidden = {3, 3};
    Rng rng(4);
    SharedLearners s = build_shared(c, spec, true, rng);
    std::vector<learners::ArmRows> arms;
    for (const auto& e : c.experiments) arms.emplace_back(e);
    GradientAccumulator acc(s.learner.pool.size());
    accumulate_joint_step(s, c, arms, 64, rng, acc);
    const nn::Gradients analytic = *acc.get(0);

    auto summed_loss = [&]() {
        GradientAccumulator scratch(s.learner.pool.size());
        Rng unused(0);
        return accumulate_joint_step(s, c, arms, 64, unused, scratch);
    };
    const double h = 1e-6;
    double worst = 0.0;
    auto& base = s.learner.pool.at(0).net;
    for (std::size_t k = 0; k < base.depth(); ++k) {
        auto& w = base.mutable_layer(k).weights;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            const double saved = w.data()[i];
            w.data()[i] = saved + h;
            const double up = summed_loss();
            w.data()[i] = saved - h;
            const double down = summed_loss();
            w.data()[i] = saved;
            worst = std::max(worst, testing::relative_error(analytic[k].weights.data()[i], (up - down) / (2 * h)));
        }
    }
    EXPECT_LE(worst, 1e-4);
}

TEST(Joint, ZeroOutcomesDriveLossToZero) {
    auto c = make_collection(2);
    for (auto& e : c.experiments) e.y.setZero();
    auto spec = small_spec(Strategy::joint, 300);
    spec.regressor.network.init.zero_output_layer = true;
    const auto r = run_transfer(c, spec);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_LE(model_for(r, i).parts()[0].predict(c.experiments[i].x).cwiseAbs().maxCoeff(), 1e-6);
    }
}

ReptileState reptile_start(const ExperimentCollection& c, const TransferSpec& spec) {
    Rng rng(derive_seed(spec.seed, "sf-reptile"));
    return initial_reptile_state(c, spec, rng);
}

TEST(SfReptile, NoInnerStepsLeavesThetaUnchanged) {
    const auto c = make_collection(3);
    auto spec = small_spec(Strategy::sf_reptile);
    spec.inner_iters = 0;
    spec.outer_iters = 10;
    const auto start = reptile_start(c, spec);
    const auto end = sf_reptile_meta_train(c, spec);
    for (std::size_t r = 0; r < 2; ++r) EXPECT_TRUE(end.thetas[r] == start.thetas[r]);
}

TEST(SfReptile, ZeroStepSizeLeavesThetaUnchanged) {
    const auto c = make_collection(3);
    auto spec = small_spec(Strategy::sf_reptile);
    spec.eps_per_layer = {0.0, 0.0, 0.0};
    const auto start = reptile_start(c, spec);
    const auto end = sf_reptile_meta_train(c, spec);
    for (std::size_t r = 0; r < 2; ++r) EXPECT_TRUE(end.thetas[r] == start.thetas[r]);
}

TEST(SfReptile, CommonStepMatchesScalarReptile) {
    const auto c = make_collection(3);
    auto spec = small_spec(Strategy::sf_reptile);
    spec.eps_per_layer = {0.3, 0.3, 0.3};
    const auto per_layer = sf_reptile_meta_train(c, spec);
    spec.update = ReptileUpdate::flat_scalar;
    const auto scalar = sf_reptile_meta_train(c, spec);
    const auto start = reptile_start(c, spec);
    for (std::size_t r = 0; r < 2; ++r) {
        EXPECT_EQ(nn::flatten_params(per_layer.thetas[r]), nn::flatten_params(scalar.thetas[r]));
        EXPECT_FALSE(per_layer.thetas[r] == start.thetas[r]);
    }
}

TEST(SfReptile, ValidatesStepSizes) {
    const auto c = make_collection(2);
    auto spec = small_spec(Strategy::sf_reptile);
    spec.eps_per_layer = {0.1, 0.2};
    EXPECT_THROW(run_transfer(c, spec), Error);
    spec.eps_per_layer = {0.1, 0.2, 1.5};
    EXPECT_THROW(run_transfer(c, spec), Error);
    spec.eps_per_layer = {0.1, 0.2, 0.3};
    spec.update = ReptileUpdate::flat_scalar;
    EXPECT_THROW(run_transfer(c, spec), Error);
    EXPECT_EQ(small_spec(Strategy::sf_reptile).resolved_eps(), (std::vector<double>{0.1, 0.30000000000000004, 0.5}));
}

TEST(SfReptile, EmitsOneModelPerExperiment) {
    const auto c = make_collection(3);
    auto spec = small_spec(Strategy::sf_reptile);
    spec.base_learner = MetaLearner::Y;
    const auto r = run_transfer(c, spec);
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(model_for(r, 2).kind(), learners::CateKind::y);
    spec.holdout = {0, 1, 2};
    EXPECT_THROW(run_transfer(c, spec), Error);
}

TEST(Mlrw, NoAdaptationGivesZeroEffect) {
    const auto c = make_collection(3);
    auto spec = small_spec(Strategy::mlrw);
    spec.adaptation_iters = 0;
    const auto r = run_transfer(c, spec);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(model_for(r, i).predict_tau(probe_points()), Vector::Zero(20));
}

TEST(Mlrw, ConstantTasksGiveConstantPredictionsAndNoEffect) {
    const double level = 1.5;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ExperimentCollection c;
        for (std::size_t i = 0; i < 4; ++i) {
            auto e = make_experiment(40, 0.0, 0.0, 200 + i);
            e.y.setConstant(level);
            c.experiments.push_back(std::move(e));
        }
        auto spec = small_spec(Strategy::mlrw);
        spec.seed = seed;
        spec.inner_iters = 20;
        spec.outer_iters = 200;
        spec.adaptation_iters = 0;
        const auto state = mlrw_meta_train(c, spec);
        const Vector zero_shot = state.scale.from_model(nn::forward_batch(state.theta, probe_points()).col(0));
        EXPECT_LE((zero_shot.array() - level).abs().maxCoeff(), 0.05) << "seed " << seed;
        spec.adaptation_iters = 20;
        const auto m = mlrw_adapt(state, c.experiments[0], spec, seed);
        EXPECT_LE(m.predict_tau(probe_points()).cwiseAbs().maxCoeff(), 0.05) << "seed " << seed;
    }
}

TEST(Mlrw, EffectSignIsTreatedMinusControl) {
    ExperimentCollection c;
    for (std::size_t i = 0; i < 3; ++i) c.experiments.push_back(make_experiment(80, 0.0, 2.0, 300 + i));
    auto spec = small_spec(Strategy::mlrw);
    spec.inner_iters = 20;
    spec.outer_iters = 60;
    spec.adaptation_iters = 100;
    const auto r = run_transfer(c, spec);
    EXPECT_GT(model_for(r, 0).predict_tau(c.experiments[0].x).mean(), 1.0);
    Vector a(2), b(2);
    a << 1.0, 2.0;
    b << 4.0, 1.0;
    EXPECT_EQ(sign_corrected_tau(a, b), Vector(b - a));
}

TEST(Mlrw, RejectsOversizedAdaptationSample) {
    const auto c = make_collection(2, 20);
    auto spec = small_spec(Strategy::mlrw);
    spec.adaptation_samples = 11;
    EXPECT_THROW(run_transfer(c, spec), Error);
    spec.adaptation_samples = 10;
    EXPECT_NO_THROW(run_transfer(c, spec));
}

TEST(Determinism, EveryStrategyRepeats) {
    const auto c = make_collection(3);
    for (Strategy s : {Strategy::baseline, Strategy::warm, Strategy::frozen, Strategy::multi_head, Strategy::joint,
                       Strategy::sf_reptile, Strategy::mlrw}) {
        const auto spec = small_spec(s);
        const auto a = run_transfer(c, spec);
        const auto b = run_transfer(c, spec);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            EXPECT_EQ(a[k].model.predict_tau(probe_points()), b[k].model.predict_tau(probe_points())) << to_string(s);
        }
        EXPECT_EQ(strategy_from_string(to_string(s)), s);
    }
}

}  // namespace
}  // namespace catelab::transfer
