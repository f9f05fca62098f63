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

// CATE meta-learners on a single experiment.
//
//   S: one regressor on (X, W);        tau(x) = mu(x, 1) - mu(x, 0)
//   T: one regressor per arm;          tau(x) = mu1(x) - mu0(x)
//   X: T-learner, then regress the imputed effects of each arm and blend
//      the two effect models with a weight g(x)
//   Y: three networks (mu0, mu1, tau) trained together, each toward targets
//      built from the other two; tau is read off the tau network.
//
// Base regressors are dense networks, linear least squares, or forests.

#ifndef CATELAB_LEARNERS_HPP
#define CATELAB_LEARNERS_HPP

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "catelab/common.hpp"
#include "catelab/data.hpp"
#include "catelab/forest.hpp"
#include "catelab/nn.hpp"
#include "catelab/training.hpp"

namespace catelab::learners {

using training::BlockPool;
using training::Chain;
using training::GradientAccumulator;
using training::NetworkSpec;
using training::OutputScale;
using training::TrainConfig;

enum class BaseKind { network, linear, forest };

inline std::string to_string(BaseKind b) {
    switch (b) {
        case BaseKind::network: return "network";
        case BaseKind::linear: return "linear";
        case BaseKind::forest: return "forest";
    }
    return "unknown";
}

struct RegressorConfig {
    BaseKind base = BaseKind::network;
    NetworkSpec network{};
    TrainConfig train{};
    forest::ForestConfig forest{};
    /// Train networks on standardized targets (identity outputs only).
    bool standardize_targets = true;
};

/// A fitted single-output regression function.
class Regressor {
public:
    struct Network {
        std::vector<nn::DenseNetwork> chain;
        OutputScale scale;
    };

    explicit Regressor(Network net) : impl_(std::move(net)) {
        const auto& chain = std::get<Network>(impl_).chain;
        require(!chain.empty(), "regressor: empty network chain");
        width_ = chain.front().input_width();
    }

    Regressor(forest::Forest f, Eigen::Index width) : impl_(std::move(f)), width_(width) {}

    Eigen::Index input_width() const { return width_; }
    bool is_network() const { return std::holds_alternative<Network>(impl_); }
    const Network& network() const { return std::get<Network>(impl_); }
    Network& mutable_network() { return std::get<Network>(impl_); }
    const forest::Forest& forest() const { return std::get<forest::Forest>(impl_); }

    Vector predict(const Matrix& x) const {
        require(x.cols() == width_, "predict: covariate width " + std::to_string(x.cols()) + " does not match " +
                                        std::to_string(width_));
        if (const auto* net = std::get_if<Network>(&impl_)) {
            Matrix act = nn::forward_batch(net->chain.front(), x);
            for (std::size_t i = 1; i < net->chain.size(); ++i) act = nn::forward_batch(net->chain[i], act);
            return net->scale.from_model(act.col(0));
        }
        return std::get<forest::Forest>(impl_).predict(x);
    }

private:
    std::variant<Network, forest::Forest> impl_;
    Eigen::Index width_ = 0;
};

inline Regressor network_regressor(const BlockPool& pool, const Chain& chain, const OutputScale& scale) {
    Regressor::Network n;
    for (std::size_t b : chain) n.chain.push_back(pool.at(b).net);
    n.scale = scale;
    return Regressor(std::move(n));
}

/// Ordinary least squares with intercept, stored as a network without hidden
/// layers.
inline Regressor fit_linear(const Matrix& x, const Vector& y) {
    require(x.rows() >= 1 && x.rows() == y.size(), "fit_linear: need matching, non-empty X and y");
    const Matrix design = append_constant_column(x, 1.0);
    const Vector coef = design.colPivHouseholderQr().solve(y);
    nn::LayerParams layer{coef.head(x.cols()).transpose(), Vector::Constant(1, coef(x.cols()))};
    Regressor::Network n;
    n.chain.emplace_back(std::vector<nn::LayerParams>{std::move(layer)}, nn::Activation::identity,
                         nn::Activation::identity);
    return Regressor(std::move(n));
}

inline OutputScale target_scale(const RegressorConfig& config, const Vector& y) {
    if (!config.standardize_targets || config.network.output_activation != nn::Activation::identity) return {};
    return training::standardizing_scale(y);
}

/// Minibatch Adam on the mean squared error with plateau early stopping.
inline Regressor fit_network_regressor(const RegressorConfig& config, const Matrix& x, const Vector& y,
                                       std::uint64_t seed, int* iterations = nullptr) {
    config.train.validate();
    Rng rng(seed);
    BlockPool pool;
    const std::size_t block = pool.add(config.network.build(x.cols(), rng), config.train.adam);
    const Chain chain{block};
    const OutputScale scale = target_scale(config, y);
    const Vector targets = scale.to_model(y);
    const auto rows = training::all_rows(x.rows());
    GradientAccumulator acc(pool.size());
    training::PlateauMonitor plateau(config.train.plateau_window, config.train.plateau_tol);
    int it = 0;
    for (; it < config.train.max_iters; ++it) {
        const auto batch = training::sample_rows(rows, config.train.batch_size, rng);
        const double loss = training::accumulate_chain_mse(pool, chain, gather_rows(x, batch), gather(targets, batch), acc);
        acc.apply(pool);
        if (plateau.record(loss)) {
            ++it;
            break;
        }
    }
    if (iterations) *iterations = it;
    return network_regressor(pool, chain, scale);
}

inline Regressor fit_regressor(const RegressorConfig& config, const Matrix& x, const Vector& y, std::uint64_t seed) {
    require(x.rows() >= 1 && x.rows() == y.size(), "fit_regressor: need matching, non-empty X and y");
    require(x.allFinite() && y.allFinite(), "fit_regressor: non-finite input");
    switch (config.base) {
        case BaseKind::linear: return fit_linear(x, y);
        case BaseKind::forest: return Regressor(forest::fit_forest(x, y, config.forest, seed), x.cols());
        case BaseKind::network: return fit_network_regressor(config, x, y, seed);
    }
    throw Error("fit_regressor: unknown base");
}

// ---------------------------------------------------------------------------
// Neural meta-learners sharing one training loop.

enum class MetaLearner { S, T, Y };

inline std::string to_string(MetaLearner k) {
    switch (k) {
        case MetaLearner::S: return "S";
        case MetaLearner::T: return "T";
        case MetaLearner::Y: return "Y";
    }
    return "?";
}

/// Roles: S = {mu}, T = {mu0, mu1}, Y = {mu0, mu1, tau}.
inline std::size_t role_count(MetaLearner k) {
    switch (k) {
        case MetaLearner::S: return 1;
        case MetaLearner::T: return 2;
        case MetaLearner::Y: return 3;
    }
    return 0;
}

/// S networks see the treatment indicator as an extra last input.
inline Eigen::Index role_input_width(MetaLearner k, Eigen::Index covariates) {
    return k == MetaLearner::S ? covariates + 1 : covariates;
}

struct Minibatch {
    Matrix x;
    Treatment w;
    Vector y;
};

inline Minibatch take_minibatch(const ExperimentData& data, std::span<const Eigen::Index> rows) {
    Minibatch b{gather_rows(data.x, rows), Treatment(static_cast<Eigen::Index>(rows.size())), gather(data.y, rows)};
    for (std::size_t i = 0; i < rows.size(); ++i) b.w(static_cast<Eigen::Index>(i)) = data.w(rows[i]);
    return b;
}

struct ArmRows {
    std::vector<Eigen::Index> control;
    std::vector<Eigen::Index> treated;
    std::vector<Eigen::Index> all;

    explicit ArmRows(const ExperimentData& data)
        : control(data.arm_rows(0)), treated(data.arm_rows(1)), all(training::all_rows(data.size())) {}
};

/// Trainable state of an S, T or Y learner: one chain and one output scale
/// per role. Chains index into `pool`, which transfer strategies may arrange
/// with shared or frozen blocks.
struct NeuralLearner {
    MetaLearner kind = MetaLearner::T;
    BlockPool pool;
    std::vector<Chain> chains;
    std::vector<OutputScale> scales;
    Eigen::Index covariate_width = 0;

    Vector predict_role(std::size_t role, const Matrix& x) const {
        return scales.at(role).from_model(training::predict_chain(pool, chains.at(role), x));
    }

    Vector predict_tau(const Matrix& x) const {
        require(x.cols() == covariate_width, "predict_tau: covariate width mismatch");
        switch (kind) {
            case MetaLearner::T: return predict_role(1, x) - predict_role(0, x);
            case MetaLearner::S:
                return predict_role(0, append_constant_column(x, 1.0)) - predict_role(0, append_constant_column(x, 0.0));
            case MetaLearner::Y: return predict_role(2, x);
        }
        throw Error("predict_tau: unknown learner");
    }
};

/// Output scales from the observed outcomes of the training experiment.
inline std::vector<OutputScale> default_scales(MetaLearner kind, const Vector& y, const RegressorConfig& config) {
    const OutputScale s = target_scale(config, y);
    std::vector<OutputScale> scales(role_count(kind), s);
    if (kind == MetaLearner::Y) scales[2] = OutputScale{0.0, s.scale};
    return scales;
}

/// Fresh networks, one block per role.
inline NeuralLearner make_neural_learner(MetaLearner kind, Eigen::Index covariates, const RegressorConfig& config,
                                         std::vector<OutputScale> scales, Rng& rng) {
    require(scales.size() == role_count(kind), "make_neural_learner: one output scale per role required");
    NeuralLearner learner;
    learner.kind = kind;
    learner.covariate_width = covariates;
    learner.scales = std::move(scales);
    for (std::size_t r = 0; r < role_count(kind); ++r) {
        const auto block = learner.pool.add(config.network.build(role_input_width(kind, covariates), rng), config.train.adam);
        learner.chains.push_back({block});
    }
    return learner;
}

/// Targets of one Y-learner update, in outcome units. They are computed from
/// the networks as they are before the update and held fixed during it.
///   W = 0: mu0 <- Y,          mu1 <- Y + tau(X),  tau <- mu1(X) - Y
///   W = 1: mu0 <- Y - tau(X), mu1 <- Y,           tau <- Y - mu0(X)
struct YTargets {
    Vector mu0;
    Vector mu1;
    Vector tau;
};

inline YTargets y_learner_targets(const NeuralLearner& learner, const Minibatch& batch) {
    require(learner.kind == MetaLearner::Y, "y_learner_targets: not a Y-learner");
    require(batch.y.allFinite(), "y_learner_step: non-finite outcomes");
    const Vector p0 = learner.predict_role(0, batch.x);
    const Vector p1 = learner.predict_role(1, batch.x);
    const Vector pt = learner.predict_role(2, batch.x);
    const Eigen::Index n = batch.y.size();
    YTargets t{Vector(n), Vector(n), Vector(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const double y = batch.y(i);
        if (batch.w(i) == 0) {
            t.mu0(i) = y;
            t.mu1(i) = y + pt(i);
            t.tau(i) = p1(i) - y;
        } else {
            t.mu0(i) = y - pt(i);
            t.mu1(i) = y;
            t.tau(i) = y - p0(i);
        }
    }
    require(t.mu0.allFinite() && t.mu1.allFinite() && t.tau.allFinite(), "y_learner_step: non-finite targets");
    return t;
}

inline double accumulate_y_step(const NeuralLearner& learner, const Minibatch& batch, GradientAccumulator& acc) {
    const YTargets t = y_learner_targets(learner, batch);
    double loss = 0.0;
    loss += training::accumulate_chain_mse(learner.pool, learner.chains[0], batch.x, learner.scales[0].to_model(t.mu0), acc);
    loss += training::accumulate_chain_mse(learner.pool, learner.chains[1], batch.x, learner.scales[1].to_model(t.mu1), acc);
    loss += training::accumulate_chain_mse(learner.pool, learner.chains[2], batch.x, learner.scales[2].to_model(t.tau), acc);
    return loss;
}

/// One Y-learner update of all three networks on `batch`.
inline double y_learner_step(NeuralLearner& learner, const Minibatch& batch) {
    GradientAccumulator acc(learner.pool.size());
    const double loss = accumulate_y_step(learner, batch, acc);
    acc.apply(learner.pool);
    return loss;
}

/// Adds one minibatch worth of gradients for every role; returns the summed
/// loss in model units.
inline double accumulate_learner_step(const NeuralLearner& learner, const ExperimentData& data, const ArmRows& arms,
                                      int batch_size, Rng& rng, GradientAccumulator& acc) {
    switch (learner.kind) {
        case MetaLearner::T: {
            const auto r0 = training::sample_rows(arms.control, batch_size, rng);
            const auto r1 = training::sample_rows(arms.treated, batch_size, rng);
            const double l0 = training::accumulate_chain_mse(learner.pool, learner.chains[0], gather_rows(data.x, r0),
                                                             learner.scales[0].to_model(gather(data.y, r0)), acc);
            const double l1 = training::accumulate_chain_mse(learner.pool, learner.chains[1], gather_rows(data.x, r1),
                                                             learner.scales[1].to_model(gather(data.y, r1)), acc);
            return l0 + l1;
        }
        case MetaLearner::S: {
            const auto rows = training::sample_rows(arms.all, batch_size, rng);
            const Minibatch b = take_minibatch(data, rows);
            return training::accumulate_chain_mse(learner.pool, learner.chains[0],
                                                  append_column(b.x, b.w.cast<double>()),
                                                  learner.scales[0].to_model(b.y), acc);
        }
        case MetaLearner::Y: {
            const auto rows = training::sample_rows(arms.all, batch_size, rng);
            return accumulate_y_step(learner, take_minibatch(data, rows), acc);
        }
    }
    throw Error("accumulate_learner_step: unknown learner");
}

/// Runs up to config.max_iters minibatch steps; returns the number taken.
inline int train_neural_learner(NeuralLearner& learner, const ExperimentData& data, const TrainConfig& config, Rng& rng) {
    config.validate();
    data.require_both_arms();
    require(data.width() == learner.covariate_width, "train: covariate width mismatch");
    const ArmRows arms(data);
    GradientAccumulator acc(learner.pool.size());
    training::PlateauMonitor plateau(config.plateau_window, config.plateau_tol);
    int it = 0;
    while (it < config.max_iters) {
        const double loss = accumulate_learner_step(learner, data, arms, config.batch_size, rng, acc);
        acc.apply(learner.pool);
        ++it;
        if (plateau.record(loss)) break;
    }
    return it;
}

// ---------------------------------------------------------------------------
// Fitted CATE models.

enum class CateKind { s, t, x, y, linear_t, forest_s, forest_t };

inline std::string to_string(CateKind k) {
    switch (k) {
        case CateKind::s: return "S";
        case CateKind::t: return "T";
        case CateKind::x: return "X";
        case CateKind::y: return "Y";
        case CateKind::linear_t: return "linear-T";
        case CateKind::forest_s: return "forest-S";
        case CateKind::forest_t: return "forest-T";
    }
    return "?";
}

/// Blend weight of the X-learner: constant or a fitted propensity model.
class XWeighting {
public:
    static XWeighting constant(double g) {
        require(g >= 0.0 && g <= 1.0, "X weighting: constant g must lie in [0,1]");
        XWeighting w;
        w.g_ = g;
        return w;
    }

    static XWeighting propensity(Regressor model) {
        XWeighting w;
        w.g_ = std::move(model);
        return w;
    }

    Vector evaluate(const Matrix& x) const {
        if (const double* c = std::get_if<double>(&g_)) return Vector::Constant(x.rows(), *c);
        Vector g = std::get<Regressor>(g_).predict(x);
        require((g.array() >= 0.0).all() && (g.array() <= 1.0).all(), "X weighting: g(x) outside [0,1]");
        return g;
    }

    bool is_constant() const { return std::holds_alternative<double>(g_); }

private:
    std::variant<double, Regressor> g_ = 0.5;
};

struct ModelMetadata {
    std::uint64_t seed = 0;
    Eigen::Index train_size = 0;
    int iterations = 0;
    std::string strategy = "baseline";
};

class CateModel {
public:
    /// Parts by kind: T kinds {mu0, mu1}; S kinds {mu(x, w)};
    /// X {mu0, mu1, tau0, tau1}; Y {mu0, mu1, tau}.
    CateModel(CateKind kind, std::vector<Regressor> parts, Eigen::Index width, ModelMetadata meta = {},
              std::optional<XWeighting> weighting = std::nullopt)
        : kind_(kind), parts_(std::move(parts)), width_(width), meta_(std::move(meta)), weighting_(std::move(weighting)) {
        std::size_t expected = 2;
        if (kind == CateKind::s || kind == CateKind::forest_s) expected = 1;
        if (kind == CateKind::x) expected = 4;
        if (kind == CateKind::y) expected = 3;
        require(parts_.size() == expected, "CateModel: wrong number of parts for " + to_string(kind));
        require(kind != CateKind::x || weighting_.has_value(), "CateModel: X-learner needs a weighting");
    }

    CateKind kind() const { return kind_; }
    Eigen::Index width() const { return width_; }
    const std::vector<Regressor>& parts() const { return parts_; }
    std::vector<Regressor>& mutable_parts() { return parts_; }
    const ModelMetadata& metadata() const { return meta_; }
    ModelMetadata& mutable_metadata() { return meta_; }

    /// Same X-learner with a different blend weight.
    CateModel with_weighting(XWeighting g) const {
        require(kind_ == CateKind::x, "with_weighting: not an X-learner");
        CateModel copy = *this;
        copy.weighting_ = std::move(g);
        return copy;
    }

    Vector predict_tau(const Matrix& x) const {
        require(x.cols() == width_, "predict_tau: covariate width " + std::to_string(x.cols()) +
                                        " does not match model width " + std::to_string(width_));
        Vector tau;
        switch (kind_) {
            case CateKind::t:
            case CateKind::linear_t:
            case CateKind::forest_t: tau = parts_[1].predict(x) - parts_[0].predict(x); break;
            case CateKind::s:
            case CateKind::forest_s:
                tau = parts_[0].predict(append_constant_column(x, 1.0)) - parts_[0].predict(append_constant_column(x, 0.0));
                break;
            case CateKind::y: tau = parts_[2].predict(x); break;
            case CateKind::x: {
                const Vector g = weighting_->evaluate(x);
                const Vector t0 = parts_[2].predict(x);
                const Vector t1 = parts_[3].predict(x);
                tau.resize(x.rows());
                for (Eigen::Index i = 0; i < x.rows(); ++i) {
                    // Equal estimates are returned as is so the blend is exactly g-invariant.
                    tau(i) = t0(i) == t1(i) ? t0(i) : g(i) * t0(i) + (1.0 - g(i)) * t1(i);
                }
                break;
            }
        }
        require(tau.allFinite(), "predict_tau: non-finite estimate");
        return tau;
    }

private:
    CateKind kind_;
    std::vector<Regressor> parts_;
    Eigen::Index width_;
    ModelMetadata meta_;
    std::optional<XWeighting> weighting_;
};

inline CateModel to_cate_model(const NeuralLearner& learner, ModelMetadata meta) {
    std::vector<Regressor> parts;
    for (std::size_t r = 0; r < learner.chains.size(); ++r) {
        parts.push_back(network_regressor(learner.pool, learner.chains[r], learner.scales[r]));
    }
    const CateKind kind = learner.kind == MetaLearner::S ? CateKind::s
                          : learner.kind == MetaLearner::T ? CateKind::t
                                                           : CateKind::y;
    return CateModel(kind, std::move(parts), learner.covariate_width, std::move(meta));
}

inline Vector predict_tau(const CateModel& model, const Matrix& x) { return model.predict_tau(x); }

struct LearnerConfig {
    RegressorConfig regressor{};
    std::uint64_t seed = 0;
};

/// Builds, trains and packages a network-based S, T or Y learner.
inline CateModel fit_neural(MetaLearner kind, const ExperimentData& data, const LearnerConfig& config) {
    data.validate();
    data.require_both_arms();
    Rng rng(derive_seed(config.seed, "neural", to_string(kind)));
    NeuralLearner learner = make_neural_learner(kind, data.width(), config.regressor,
                                                default_scales(kind, data.y, config.regressor), rng);
    const int iters = train_neural_learner(learner, data, config.regressor.train, rng);
    return to_cate_model(learner, {config.seed, data.size(), iters, "baseline"});
}

inline CateModel fit_t_learner(const ExperimentData& data, const LearnerConfig& config) {
    data.validate();
    data.require_both_arms();
    const auto& rc = config.regressor;
    if (rc.base == BaseKind::network) return fit_neural(MetaLearner::T, data, config);
    const auto c = data.arm_rows(0);
    const auto t = data.arm_rows(1);
    std::vector<Regressor> parts;
    parts.push_back(fit_regressor(rc, gather_rows(data.x, c), gather(data.y, c), derive_seed(config.seed, "mu", 0)));
    parts.push_back(fit_regressor(rc, gather_rows(data.x, t), gather(data.y, t), derive_seed(config.seed, "mu", 1)));
    const CateKind kind = rc.base == BaseKind::linear ? CateKind::linear_t : CateKind::forest_t;
    return CateModel(kind, std::move(parts), data.width(), {config.seed, data.size(), 0, "baseline"});
}

inline CateModel fit_s_learner(const ExperimentData& data, const LearnerConfig& config) {
    data.validate();
    data.require_both_arms();
    const auto& rc = config.regressor;
    if (rc.base == BaseKind::network) return fit_neural(MetaLearner::S, data, config);
    std::vector<Regressor> parts;
    parts.push_back(fit_regressor(rc, append_column(data.x, data.w.cast<double>()), data.y, derive_seed(config.seed, "mu")));
    const CateKind kind = rc.base == BaseKind::forest ? CateKind::forest_s : CateKind::s;
    return CateModel(kind, std::move(parts), data.width(), {config.seed, data.size(), 0, "baseline"});
}

inline CateModel fit_y_learner(const ExperimentData& data, const LearnerConfig& config) {
    require(config.regressor.base == BaseKind::network, "Y-learner requires network base learners");
    return fit_neural(MetaLearner::Y, data, config);
}

struct XWeightingSpec {
    enum class Kind { treated_fraction, constant, propensity };
    Kind kind = Kind::treated_fraction;
    double value = 0.5;  // used by Kind::constant
};

/// Imputed effects: D1 = Y1 - mu0(X1) for treated, D0 = mu1(X0) - Y0 for
/// control units.
struct ImputedEffects {
    std::vector<Eigen::Index> treated_rows;
    Vector treated;
    std::vector<Eigen::Index> control_rows;
    Vector control;
};

inline ImputedEffects impute_effects(const ExperimentData& data, const Regressor& mu0, const Regressor& mu1) {
    ImputedEffects d;
    d.treated_rows = data.arm_rows(1);
    d.control_rows = data.arm_rows(0);
    d.treated = gather(data.y, d.treated_rows) - mu0.predict(gather_rows(data.x, d.treated_rows));
    d.control = mu1.predict(gather_rows(data.x, d.control_rows)) - gather(data.y, d.control_rows);
    return d;
}

inline CateModel fit_x_learner(const ExperimentData& data, const LearnerConfig& config,
                               const XWeightingSpec& weighting = {}) {
    data.validate();
    data.require_both_arms();
    // Stage 1: response functions per arm.
    LearnerConfig stage1 = config;
    stage1.seed = derive_seed(config.seed, "x-stage1");
    const CateModel t = fit_t_learner(data, stage1);
    const Regressor& mu0 = t.parts()[0];
    const Regressor& mu1 = t.parts()[1];

    // Stage 2: regress imputed effects per arm.
    const ImputedEffects d = impute_effects(data, mu0, mu1);
    RegressorConfig effect_config = config.regressor;
    Regressor tau0 = fit_regressor(effect_config, gather_rows(data.x, d.control_rows), d.control,
                                   derive_seed(config.seed, "x-tau", 0));
    Regressor tau1 = fit_regressor(effect_config, gather_rows(data.x, d.treated_rows), d.treated,
                                   derive_seed(config.seed, "x-tau", 1));

    XWeighting g = XWeighting::constant(data.treated_fraction());
    switch (weighting.kind) {
        case XWeightingSpec::Kind::treated_fraction: break;
        case XWeightingSpec::Kind::constant: g = XWeighting::constant(weighting.value); break;
        case XWeightingSpec::Kind::propensity: {
            RegressorConfig prop = config.regressor;
            prop.base = BaseKind::network;
            prop.network.output_activation = nn::Activation::logistic;
            prop.standardize_targets = false;
            g = XWeighting::propensity(
                fit_regressor(prop, data.x, data.w.cast<double>(), derive_seed(config.seed, "x-propensity")));
            break;
        }
    }
    std::vector<Regressor> parts{mu0, mu1, std::move(tau0), std::move(tau1)};
    return CateModel(CateKind::x, std::move(parts), data.width(), {config.seed, data.size(), 0, "baseline"},
                     std::move(g));
}

}  // namespace catelab::learners

#endif  // CATELAB_LEARNERS_HPP
