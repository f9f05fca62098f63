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

// Transfer strategies over a collection of related experiments that share
// one covariate space.
//
//   baseline    independent fit per experiment
//   warm        train on a source experiment, continue training on the target
//   frozen      reuse the source's lower layers as fixed features for the target
//   multi_head  per-role shared lower layers, per-experiment upper layers,
//               trained round-robin
//   joint       one shared lower block for every role and experiment, all
//               losses summed into each step
//   sf_reptile  Reptile meta-training with one interpolation step per layer,
//               then per-experiment adaptation
//   mlrw        one regression network meta-trained on every (experiment,
//               arm) task, adapted separately to each arm at evaluation
//
// All strategies except mlrw work with S, T and Y base learners; mlrw is a
// per-arm method and always yields a T-style model.

#ifndef CATELAB_TRANSFER_HPP
#define CATELAB_TRANSFER_HPP

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "catelab/common.hpp"
#include "catelab/data.hpp"
#include "catelab/learners.hpp"
#include "catelab/nn.hpp"
#include "catelab/training.hpp"

namespace catelab::transfer {

using learners::CateModel;
using learners::MetaLearner;
using learners::NeuralLearner;
using learners::RegressorConfig;
using training::BlockPool;
using training::Chain;
using training::GradientAccumulator;
using training::OutputScale;

enum class Strategy { baseline, warm, frozen, multi_head, joint, sf_reptile, mlrw };

inline std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::baseline: return "baseline";
        case Strategy::warm: return "warm";
        case Strategy::frozen: return "frozen";
        case Strategy::multi_head: return "multi-head";
        case Strategy::joint: return "joint";
        case Strategy::sf_reptile: return "sf-reptile";
        case Strategy::mlrw: return "mlrw";
    }
    return "unknown";
}

inline Strategy strategy_from_string(const std::string& s) {
    for (Strategy v : {Strategy::baseline, Strategy::warm, Strategy::frozen, Strategy::multi_head, Strategy::joint,
                       Strategy::sf_reptile, Strategy::mlrw}) {
        if (to_string(v) == s) return v;
    }
    throw Error("unknown transfer strategy '" + s + "'");
}

/// How the Reptile outer update is evaluated. Both give identical results
/// when every layer uses the same step; flat_scalar exists as a reference.
enum class ReptileUpdate { per_layer, flat_scalar };

struct TransferSpec {
    Strategy strategy = Strategy::baseline;
    MetaLearner base_learner = MetaLearner::T;
    RegressorConfig regressor{};
    std::uint64_t seed = 0;

    /// warm / frozen: experiment providing the initial parameters, and the
    /// experiment they are transferred to.
    std::size_t source = 0;
    std::size_t target = 1;
    /// warm / frozen: steps on the target; < 0 uses regressor.train.max_iters.
    int target_iters = -1;
    /// warm: train the target from scratch (the baseline fit of the target).
    bool ignore_source = false;

    /// frozen: number of lower layers kept fixed.
    int k_frozen_layers = 2;
    /// frozen: start the trainable head from the source's upper layers
    /// instead of a fresh initialization.
    bool head_from_source = true;

    /// multi_head / joint: number of lower layers in the shared block.
    int shared_layers = 2;
    /// multi_head: minibatch steps per experiment visit.
    int steps_per_visit = 10;

    /// sf_reptile / mlrw: one step size per layer; empty means linearly
    /// spaced from 0.1 (first layer) to 0.5 (last layer).
    std::vector<double> eps_per_layer;
    int inner_iters = 50;
    int outer_iters = 1000;
    /// Shuffle the experiment order of every pass over the collection.
    bool shuffle_outer = false;
    ReptileUpdate update = ReptileUpdate::per_layer;
    /// Experiments left out of meta-training (still evaluated).
    std::vector<std::size_t> holdout;
    /// Evaluation adaptation steps; < 0 uses inner_iters.
    int adaptation_iters = -1;
    /// mlrw: units per arm used for adaptation; 0 uses the whole arm.
    int adaptation_samples = 100;

    std::vector<double> resolved_eps() const {
        const std::size_t depth = regressor.network.depth();
        if (!eps_per_layer.empty()) return eps_per_layer;
        std::vector<double> eps(depth);
        for (std::size_t p = 0; p < depth; ++p) {
            eps[p] = depth == 1 ? 0.5 : 0.1 + 0.4 * static_cast<double>(p) / static_cast<double>(depth - 1);
        }
        return eps;
    }

    int resolved_target_iters() const { return target_iters < 0 ? regressor.train.max_iters : target_iters; }
    int resolved_adaptation_iters() const { return adaptation_iters < 0 ? inner_iters : adaptation_iters; }

    void validate() const {
        regressor.train.validate();
        require(regressor.base == learners::BaseKind::network, "transfer: base learners must be networks");
        const auto depth = static_cast<int>(regressor.network.depth());
        switch (strategy) {
            case Strategy::frozen:
                require(k_frozen_layers >= 1 && k_frozen_layers < depth,
                        "transfer: k_frozen_layers must satisfy 1 <= k < depth (" + std::to_string(depth) + ")");
                break;
            case Strategy::multi_head:
            case Strategy::joint:
                require(shared_layers >= 1 && shared_layers < depth,
                        "transfer: shared_layers must satisfy 1 <= k < depth (" + std::to_string(depth) + ")");
                require(steps_per_visit >= 1, "transfer: steps_per_visit must be >= 1");
                break;
            case Strategy::sf_reptile:
            case Strategy::mlrw: {
                const auto eps = resolved_eps();
                require(eps.size() == static_cast<std::size_t>(depth),
                        "transfer: eps_per_layer needs " + std::to_string(depth) + " entries, got " +
                            std::to_string(eps.size()));
                for (double e : eps) require(e >= 0.0 && e <= 1.0, "transfer: eps_per_layer entries must lie in [0,1]");
                if (update == ReptileUpdate::flat_scalar) {
                    require(std::all_of(eps.begin(), eps.end(), [&](double e) { return e == eps.front(); }),
                            "transfer: the flat scalar update needs one common step size");
                }
                require(inner_iters >= 0 && outer_iters >= 0, "transfer: iteration counts must be >= 0");
                require(adaptation_samples >= 0, "transfer: adaptation_samples must be >= 0");
                break;
            }
            default: break;
        }
    }
};

struct ExperimentCollection {
    std::vector<ExperimentData> experiments;

    std::size_t size() const { return experiments.size(); }
    Eigen::Index width() const { return experiments.empty() ? 0 : experiments.front().width(); }

    void validate(std::size_t min_experiments = 1) const {
        require(experiments.size() >= min_experiments, "collection: need at least " + std::to_string(min_experiments) +
                                                            " experiments, got " + std::to_string(experiments.size()));
        for (std::size_t i = 0; i < experiments.size(); ++i) {
            const auto& e = experiments[i];
            require(e.size() > 0, "collection: experiment " + std::to_string(i) + " is empty");
            require(e.width() == width(), "collection: experiment " + std::to_string(i) + " has covariate width " +
                                              std::to_string(e.width()) + ", expected " + std::to_string(width()));
            e.validate();
            e.require_both_arms();
        }
    }
};

struct ExperimentModel {
    std::size_t experiment;
    CateModel model;
};

using TransferResult = std::vector<ExperimentModel>;

inline const CateModel& model_for(const TransferResult& result, std::size_t experiment) {
    for (const auto& m : result) {
        if (m.experiment == experiment) return m.model;
    }
    throw Error("transfer result has no model for experiment " + std::to_string(experiment));
}

/// Mean/sd of every outcome in the collection; shared by strategies whose
/// parameters serve several experiments.
inline std::vector<OutputScale> pooled_scales(MetaLearner kind, const ExperimentCollection& c,
                                              const RegressorConfig& rc) {
    Eigen::Index n = 0;
    for (const auto& e : c.experiments) n += e.size();
    Vector all(n);
    Eigen::Index pos = 0;
    for (const auto& e : c.experiments) {
        all.segment(pos, e.size()) = e.y;
        pos += e.size();
    }
    return learners::default_scales(kind, all, rc);
}

inline learners::ModelMetadata metadata(const TransferSpec& spec, const ExperimentData& data, int iterations) {
    return {spec.seed, data.size(), iterations, to_string(spec.strategy)};
}

// ---------------------------------------------------------------------------
// Baseline

/// Independent of the experiment index and of the rest of the collection, so
/// a baseline fit depends on its own data and the seed only.
inline std::uint64_t baseline_seed(const TransferSpec& spec) { return spec.seed; }

inline TransferResult run_baseline(const ExperimentCollection& c, const TransferSpec& spec) {
    c.validate(1);
    TransferResult out;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const learners::LearnerConfig config{spec.regressor, baseline_seed(spec)};
        CateModel m = learners::fit_neural(spec.base_learner, c.experiments[i], config);
        m.mutable_metadata().strategy = to_string(Strategy::baseline);
        out.push_back({i, std::move(m)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Warm start and frozen features

inline void require_source_target(const ExperimentCollection& c, const TransferSpec& spec) {
    c.validate(2);
    require(spec.source < c.size() && spec.target < c.size(), "transfer: source/target index out of range");
    require(spec.source != spec.target, "transfer: source and target must differ");
}

struct SourceTargetRun {
    NeuralLearner source;
    NeuralLearner target;
    int source_iterations = 0;
    int target_iterations = 0;
};

inline NeuralLearner train_source(const ExperimentCollection& c, const TransferSpec& spec, int& iterations) {
    const ExperimentData& src = c.experiments[spec.source];
    Rng rng(derive_seed(spec.seed, "source", spec.source));
    NeuralLearner source = learners::make_neural_learner(
        spec.base_learner, c.width(), spec.regressor, learners::default_scales(spec.base_learner, src.y, spec.regressor),
        rng);
    iterations = learners::train_neural_learner(source, src, spec.regressor.train, rng);
    return source;
}

inline training::TrainConfig target_train_config(const TransferSpec& spec) {
    training::TrainConfig t = spec.regressor.train;
    t.max_iters = spec.resolved_target_iters();
    return t;
}

/// Source fit, then target training from the source's parameters with a
/// fresh optimizer state.
inline SourceTargetRun warm_start(const ExperimentCollection& c, const TransferSpec& spec) {
    require_source_target(c, spec);
    SourceTargetRun run;
    run.source = train_source(c, spec, run.source_iterations);
    run.target = run.source;
    run.target.pool.reset_optimizers();
    Rng rng(derive_seed(spec.seed, "warm-target", spec.target));
    run.target_iterations =
        learners::train_neural_learner(run.target, c.experiments[spec.target], target_train_config(spec), rng);
    return run;
}

inline TransferResult run_warm_start(const ExperimentCollection& c, const TransferSpec& spec) {
    spec.validate();
    require_source_target(c, spec);
    const ExperimentData& tgt = c.experiments[spec.target];
    if (spec.ignore_source) {
        const learners::LearnerConfig config{spec.regressor, baseline_seed(spec)};
        CateModel m = learners::fit_neural(spec.base_learner, tgt, config);
        m.mutable_metadata().strategy = to_string(Strategy::warm);
        return {{spec.target, std::move(m)}};
    }
    const SourceTargetRun run = warm_start(c, spec);
    return {{spec.target, learners::to_cate_model(run.target, metadata(spec, tgt, run.target_iterations))}};
}

/// Every role's network is split after k layers; the lower part is copied
/// from the source and frozen, the upper part is trained on the target.
inline SourceTargetRun frozen_features(const ExperimentCollection& c, const TransferSpec& spec) {
    require_source_target(c, spec);
    spec.validate();
    SourceTargetRun run;
    run.source = train_source(c, spec, run.source_iterations);
    const auto k = static_cast<std::size_t>(spec.k_frozen_layers);

    NeuralLearner& target = run.target;
    target.kind = spec.base_learner;
    target.covariate_width = c.width();
    target.scales = run.source.scales;
    Rng init_rng(derive_seed(spec.seed, "frozen-head", spec.target));
    for (const Chain& chain : run.source.chains) {
        const auto [front, back] = nn::split_network(run.source.pool.at(chain.front()).net, k);
        nn::DenseNetwork head = back;
        if (!spec.head_from_source) {
            const nn::DenseNetwork fresh = spec.regressor.network.build(
                learners::role_input_width(spec.base_learner, c.width()), init_rng);
            head = nn::split_network(fresh, k).second;
        }
        const auto f = target.pool.add(front, spec.regressor.train.adam, true);
        const auto h = target.pool.add(std::move(head), spec.regressor.train.adam);
        target.chains.push_back({f, h});
    }
    Rng rng(derive_seed(spec.seed, "frozen-target", spec.target));
    run.target_iterations =
        learners::train_neural_learner(target, c.experiments[spec.target], target_train_config(spec), rng);
    return run;
}

inline TransferResult run_frozen_features(const ExperimentCollection& c, const TransferSpec& spec) {
    const SourceTargetRun run = frozen_features(c, spec);
    const ExperimentData& tgt = c.experiments[spec.target];
    return {{spec.target, learners::to_cate_model(run.target, metadata(spec, tgt, run.target_iterations))}};
}

// ---------------------------------------------------------------------------
// Shared lower layers: multi-head and joint training

/// One pool holding every block, and per-experiment chain sets into it.
struct SharedLearners {
    NeuralLearner learner;  // pool + scales; chains are swapped per experiment
    std::vector<std::vector<Chain>> chains;  // [experiment][role]

    NeuralLearner& view(std::size_t experiment) {
        learner.chains = chains.at(experiment);
        return learner;
    }
};

/// share_across_roles = false: one lower block per role (multi-head);
/// true: a single lower block for every role (joint).
inline SharedLearners build_shared(const ExperimentCollection& c, const TransferSpec& spec, bool share_across_roles,
                                   Rng& rng) {
    const MetaLearner kind = spec.base_learner;
    const auto roles = learners::role_count(kind);
    const auto k = static_cast<std::size_t>(spec.shared_layers);
    const auto width = learners::role_input_width(kind, c.width());
    const auto& adam = spec.regressor.train.adam;

    SharedLearners s;
    s.learner.kind = kind;
    s.learner.covariate_width = c.width();
    s.learner.scales = pooled_scales(kind, c, spec.regressor);

    std::vector<std::size_t> bases;
    for (std::size_t r = 0; r < (share_across_roles ? 1 : roles); ++r) {
        bases.push_back(s.learner.pool.add(nn::split_network(spec.regressor.network.build(width, rng), k).first, adam));
    }
    for (std::size_t i = 0; i < c.size(); ++i) {
        std::vector<Chain> per_role;
        for (std::size_t r = 0; r < roles; ++r) {
            const auto head =
                s.learner.pool.add(nn::split_network(spec.regressor.network.build(width, rng), k).second, adam);
            per_role.push_back({bases[share_across_roles ? 0 : r], head});
        }
        s.chains.push_back(std::move(per_role));
    }
    return s;
}

inline TransferResult package_shared(SharedLearners& s, const ExperimentCollection& c, const TransferSpec& spec,
                                     int iterations) {
    TransferResult out;
    for (std::size_t i = 0; i < c.size(); ++i) {
        out.push_back({i, learners::to_cate_model(s.view(i), metadata(spec, c.experiments[i], iterations))});
    }
    return out;
}

/// Round-robin over experiments, steps_per_visit steps per visit, until each
/// experiment has received regressor.train.max_iters steps.
inline SharedLearners multi_head(const ExperimentCollection& c, const TransferSpec& spec) {
    c.validate(1);
    spec.validate();
    Rng rng(derive_seed(spec.seed, "multi-head"));
    SharedLearners s = build_shared(c, spec, false, rng);
    std::vector<learners::ArmRows> arms;
    for (const auto& e : c.experiments) arms.emplace_back(e);
    GradientAccumulator acc(s.learner.pool.size());
    const int budget = spec.regressor.train.max_iters;
    for (int done = 0; done < budget; done += spec.steps_per_visit) {
        const int steps = std::min(spec.steps_per_visit, budget - done);
        for (std::size_t i = 0; i < c.size(); ++i) {
            NeuralLearner& view = s.view(i);
            for (int t = 0; t < steps; ++t) {
                learners::accumulate_learner_step(view, c.experiments[i], arms[i], spec.regressor.train.batch_size, rng,
                                                  acc);
                acc.apply(view.pool);
            }
        }
    }
    return s;
}

inline TransferResult run_multi_head(const ExperimentCollection& c, const TransferSpec& spec) {
    SharedLearners s = multi_head(c, spec);
    return package_shared(s, c, spec, spec.regressor.train.max_iters);
}

/// Loss of one joint step: the sum over experiments and roles.
inline double accumulate_joint_step(SharedLearners& s, const ExperimentCollection& c,
                                    const std::vector<learners::ArmRows>& arms, int batch_size, Rng& rng,
                                    GradientAccumulator& acc) {
    double loss = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        loss += learners::accumulate_learner_step(s.view(i), c.experiments[i], arms[i], batch_size, rng, acc);
    }
    return loss;
}

inline SharedLearners joint_training(const ExperimentCollection& c, const TransferSpec& spec, int* iterations = nullptr) {
    c.validate(1);
    spec.validate();
    Rng rng(derive_seed(spec.seed, "joint"));
    SharedLearners s = build_shared(c, spec, true, rng);
    std::vector<learners::ArmRows> arms;
    for (const auto& e : c.experiments) arms.emplace_back(e);
    GradientAccumulator acc(s.learner.pool.size());
    const auto& train = spec.regressor.train;
    training::PlateauMonitor plateau(train.plateau_window, train.plateau_tol);
    int it = 0;
    while (it < train.max_iters) {
        const double loss = accumulate_joint_step(s, c, arms, train.batch_size, rng, acc);
        acc.apply(s.learner.pool);
        ++it;
        if (plateau.record(loss)) break;
    }
    if (iterations) *iterations = it;
    return s;
}

inline TransferResult run_joint(const ExperimentCollection& c, const TransferSpec& spec) {
    int iterations = 0;
    SharedLearners s = joint_training(c, spec, &iterations);
    return package_shared(s, c, spec, iterations);
}

// ---------------------------------------------------------------------------
// Reptile-style meta-training

/// Folds the inner-loop result back into theta.
inline void reptile_update(nn::DenseNetwork& theta, const nn::DenseNetwork& updated, const TransferSpec& spec,
                           const std::vector<double>& eps) {
    if (spec.update == ReptileUpdate::flat_scalar) {
        nn::assign_flat_params(theta, nn::interpolate_flat(nn::flatten_params(theta), nn::flatten_params(updated),
                                                           eps.front()));
    } else {
        theta = nn::interpolate_params(theta, updated, eps);
    }
}

/// Order in which meta-training visits experiments: the non-held-out ones,
/// cycled, optionally reshuffled on every pass.
class TaskSchedule {
public:
    TaskSchedule(std::size_t experiments, const TransferSpec& spec) : shuffle_(spec.shuffle_outer) {
        for (std::size_t i = 0; i < experiments; ++i) {
            if (std::find(spec.holdout.begin(), spec.holdout.end(), i) == spec.holdout.end()) order_.push_back(i);
        }
        require(!order_.empty(), "transfer: every experiment is held out of meta-training");
    }

    std::size_t next(Rng& rng) {
        if (pos_ == 0 && shuffle_) std::shuffle(order_.begin(), order_.end(), rng);
        const std::size_t i = order_[pos_];
        pos_ = (pos_ + 1) % order_.size();
        return i;
    }

    const std::vector<std::size_t>& experiments() const { return order_; }

private:
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
    bool shuffle_;
};

/// A learner whose single-block chains start from `thetas`, with fresh
/// optimizer state.
inline NeuralLearner learner_from(MetaLearner kind, Eigen::Index width, const std::vector<nn::DenseNetwork>& thetas,
                                  const std::vector<OutputScale>& scales, const nn::AdamConfig& adam) {
    NeuralLearner l;
    l.kind = kind;
    l.covariate_width = width;
    l.scales = scales;
    for (const auto& t : thetas) l.chains.push_back({l.pool.add(t, adam)});
    return l;
}

inline training::TrainConfig fixed_steps(const training::TrainConfig& base, int steps) {
    training::TrainConfig t = base;
    t.max_iters = steps;
    t.plateau_window = 0;
    return t;
}

struct ReptileState {
    std::vector<nn::DenseNetwork> thetas;  // one per role
    std::vector<OutputScale> scales;
};

inline ReptileState initial_reptile_state(const ExperimentCollection& c, const TransferSpec& spec, Rng& rng) {
    const MetaLearner kind = spec.base_learner;
    ReptileState s;
    s.scales = pooled_scales(kind, c, spec.regressor);
    for (std::size_t r = 0; r < learners::role_count(kind); ++r) {
        s.thetas.push_back(spec.regressor.network.build(learners::role_input_width(kind, c.width()), rng));
    }
    return s;
}

/// Outer loop: pick an experiment, run inner_iters steps of the base
/// learner from theta, then move every role's theta toward the result.
inline ReptileState sf_reptile_meta_train(const ExperimentCollection& c, const TransferSpec& spec) {
    c.validate(2);
    spec.validate();
    Rng rng(derive_seed(spec.seed, "sf-reptile"));
    ReptileState state = initial_reptile_state(c, spec, rng);
    const auto eps = spec.resolved_eps();
    const auto inner = fixed_steps(spec.regressor.train, spec.inner_iters);
    TaskSchedule schedule(c.size(), spec);
    for (int outer = 0; outer < spec.outer_iters; ++outer) {
        const std::size_t i = schedule.next(rng);
        NeuralLearner l = learner_from(spec.base_learner, c.width(), state.thetas, state.scales, spec.regressor.train.adam);
        learners::train_neural_learner(l, c.experiments[i], inner, rng);
        for (std::size_t r = 0; r < state.thetas.size(); ++r) {
            reptile_update(state.thetas[r], l.pool.at(l.chains[r].front()).net, spec, eps);
        }
    }
    return state;
}

inline TransferResult run_sf_reptile(const ExperimentCollection& c, const TransferSpec& spec) {
    const ReptileState state = sf_reptile_meta_train(c, spec);
    const auto adapt = fixed_steps(spec.regressor.train, spec.resolved_adaptation_iters());
    TransferResult out;
    for (std::size_t i = 0; i < c.size(); ++i) {
        Rng rng(derive_seed(spec.seed, "sf-reptile-adapt", i));
        NeuralLearner l = learner_from(spec.base_learner, c.width(), state.thetas, state.scales, spec.regressor.train.adam);
        learners::train_neural_learner(l, c.experiments[i], adapt, rng);
        out.push_back({i, learners::to_cate_model(l, metadata(spec, c.experiments[i], adapt.max_iters))});
    }
    return out;
}

// ---------------------------------------------------------------------------
// MLRW

/// Plain minibatch regression of one network on (x, y) for a fixed number
/// of steps, from a fresh optimizer state.
inline nn::DenseNetwork adapt_regression(const nn::DenseNetwork& start, const OutputScale& scale, const Matrix& x,
                                         const Vector& y, int steps, const training::TrainConfig& train, Rng& rng) {
    BlockPool pool;
    const auto b = pool.add(start, train.adam);
    const Chain chain{b};
    const Vector targets = scale.to_model(y);
    const auto rows = training::all_rows(x.rows());
    GradientAccumulator acc(1);
    for (int t = 0; t < steps; ++t) {
        const auto batch = training::sample_rows(rows, train.batch_size, rng);
        training::accumulate_chain_mse(pool, chain, gather_rows(x, batch), gather(targets, batch), acc);
        acc.apply(pool);
    }
    return pool.at(b).net;
}

struct MlrwState {
    nn::DenseNetwork theta;
    OutputScale scale;
};

/// Each outer iteration visits one experiment and, for arm 0 then arm 1,
/// adapts theta to that arm's response and interpolates theta toward it.
inline MlrwState mlrw_meta_train(const ExperimentCollection& c, const TransferSpec& spec) {
    c.validate(2);
    spec.validate();
    Rng rng(derive_seed(spec.seed, "mlrw"));
    MlrwState state{spec.regressor.network.build(c.width(), rng),
                    pooled_scales(MetaLearner::T, c, spec.regressor).front()};
    const auto eps = spec.resolved_eps();
    TaskSchedule schedule(c.size(), spec);
    for (int outer = 0; outer < spec.outer_iters; ++outer) {
        const ExperimentData& e = c.experiments[schedule.next(rng)];
        for (int arm : {0, 1}) {
            const auto rows = e.arm_rows(arm);
            const nn::DenseNetwork updated = adapt_regression(state.theta, state.scale, gather_rows(e.x, rows),
                                                              gather(e.y, rows), spec.inner_iters, spec.regressor.train, rng);
            reptile_update(state.theta, updated, spec, eps);
        }
    }
    return state;
}

/// Adapts theta separately to each arm of `data` and returns the per-arm
/// networks as a T-style model (tau = mu1 - mu0).
inline CateModel mlrw_adapt(const MlrwState& state, const ExperimentData& data, const TransferSpec& spec,
                            std::uint64_t seed) {
    std::vector<learners::Regressor> parts;
    Rng rng(seed);
    for (int arm : {0, 1}) {
        auto rows = data.arm_rows(arm);
        if (spec.adaptation_samples > 0) {
            require(static_cast<std::size_t>(spec.adaptation_samples) <= rows.size(),
                    "mlrw: adaptation_samples (" + std::to_string(spec.adaptation_samples) + ") exceeds arm " +
                        std::to_string(arm) + " size (" + std::to_string(rows.size()) + ")");
            rows.resize(static_cast<std::size_t>(spec.adaptation_samples));
        }
        const nn::DenseNetwork net = adapt_regression(state.theta, state.scale, gather_rows(data.x, rows),
                                                      gather(data.y, rows), spec.resolved_adaptation_iters(),
                                                      spec.regressor.train, rng);
        parts.emplace_back(learners::Regressor::Network{{net}, state.scale});
    }
    return CateModel(learners::CateKind::t, std::move(parts), data.width(),
                     metadata(spec, data, spec.resolved_adaptation_iters()));
}

inline TransferResult run_mlrw(const ExperimentCollection& c, const TransferSpec& spec) {
    const MlrwState state = mlrw_meta_train(c, spec);
    TransferResult out;
    for (std::size_t i = 0; i < c.size(); ++i) {
        out.push_back({i, mlrw_adapt(state, c.experiments[i], spec, derive_seed(spec.seed, "mlrw-adapt", i))});
    }
    return out;
}

/// Effect estimate from per-arm predictions, treated minus control.
inline Vector sign_corrected_tau(const Vector& mu0_hat, const Vector& mu1_hat) { return mu1_hat - mu0_hat; }

// ---------------------------------------------------------------------------

inline TransferResult run_transfer(const ExperimentCollection& c, const TransferSpec& spec) {
    spec.validate();
    switch (spec.strategy) {
        case Strategy::baseline: return run_baseline(c, spec);
        case Strategy::warm: return run_warm_start(c, spec);
        case Strategy::frozen: return run_frozen_features(c, spec);
        case Strategy::multi_head: return run_multi_head(c, spec);
        case Strategy::joint: return run_joint(c, spec);
        case Strategy::sf_reptile: return run_sf_reptile(c, spec);
        case Strategy::mlrw: return run_mlrw(c, spec);
    }
    throw Error("run_transfer: unknown strategy");
}

}  // namespace catelab::transfer

#endif  // CATELAB_TRANSFER_HPP
