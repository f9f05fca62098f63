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

// Data-generating processes with known response surfaces.
//
// Voter-style processes work on an 11-column covariate schema (age, seven
// past-turnout indicators, marital status, race code, gender) drawn from a
// synthetic sampler. Outcomes are binary turnout draws around the response
// surfaces. The MNIST process assigns label-dependent responses to images.

#ifndef CATELAB_DGP_HPP
#define CATELAB_DGP_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "catelab/common.hpp"
#include "catelab/data.hpp"
#include "catelab/forest.hpp"

namespace catelab::dgp {

// ---------------------------------------------------------------------------
// Voter covariates

inline constexpr Eigen::Index kVoterWidth = 11;
inline constexpr std::array<int, 7> kTurnoutYears{2006, 2008, 2009, 2010, 2011, 2012, 2013};

inline std::vector<std::string> voter_feature_names() {
    std::vector<std::string> names{"age"};
    for (int y : kTurnoutYears) names.push_back("voted_" + std::to_string(y));
    names.insert(names.end(), {"married", "race", "gender"});
    return names;
}

namespace detail {
// Baseline turnout log-odds by year: presidential years highest, midterms
// next, odd-year local elections lowest.
inline constexpr std::array<double, 7> kTurnoutIntercept{-0.2, 0.9, -1.6, -0.1, -1.7, 0.8, -1.8};
inline constexpr std::array<double, 4> kRaceShares{0.70, 0.12, 0.10, 0.08};
}  // namespace detail

/// Raw schema: age in years (18 to 95), turnout and marital indicators in
/// {0, 1}, race code in {0, 1, 2, 3}, gender in {0, 1}.
///
/// Turnout indicators share a latent civic-engagement score z ~ N(0, 1):
/// voted_y ~ Bern(logistic(a_y + 1.5 z + 0.02 (age - 50))), which makes
/// every pair of years positively correlated. Marriage rises with age.
inline Matrix sample_voter_covariates(Eigen::Index n, Rng& rng) {
    require(n >= 1, "sample_voter_covariates: n must be >= 1");
    Matrix x(n, kVoterWidth);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::discrete_distribution<int> race(detail::kRaceShares.begin(), detail::kRaceShares.end());
    for (Eigen::Index i = 0; i < n; ++i) {
        const double age = std::clamp(48.0 + 17.0 * normal(rng), 18.0, 95.0);
        const double engagement = normal(rng);
        x(i, 0) = age;
        for (std::size_t t = 0; t < kTurnoutYears.size(); ++t) {
            const double p = logistic(detail::kTurnoutIntercept[t] + 1.5 * engagement + 0.02 * (age - 50.0));
            x(i, static_cast<Eigen::Index>(1 + t)) = unif(rng) < p ? 1.0 : 0.0;
        }
        x(i, 8) = unif(rng) < logistic(-0.4 + 0.05 * (age - 40.0)) ? 1.0 : 0.0;
        x(i, 9) = static_cast<double>(race(rng));
        x(i, 10) = unif(rng) < 0.52 ? 1.0 : 0.0;
    }
    return x;
}

/// Learner-facing covariates: age rescaled to (age - 50) / 15, everything
/// else unchanged.
inline Matrix voter_design(const Matrix& raw) {
    require(raw.cols() == kVoterWidth, "voter_design: expected 11 columns");
    Matrix x = raw;
    x.col(0) = (raw.col(0).array() - 50.0) / 15.0;
    return x;
}

// ---------------------------------------------------------------------------
// Outcome draws shared by the binary-outcome processes

inline Treatment fair_coin_assignment(Eigen::Index n, Rng& rng) {
    std::bernoulli_distribution coin(0.5);
    Treatment w(n);
    for (Eigen::Index i = 0; i < n; ++i) w(i) = coin(rng) ? 1 : 0;
    return w;
}

/// Y_obs ~ Bern(mu_W(x)); attaches mu0, mu1 and tau = mu1 - mu0.
inline ExperimentData bernoulli_experiment(Matrix x, Treatment w, Vector mu0, Vector mu1, Rng& rng) {
    const Eigen::Index n = x.rows();
    require(w.size() == n && mu0.size() == n && mu1.size() == n, "bernoulli_experiment: length mismatch");
    auto in_unit = [](const Vector& v) { return (v.array() >= 0.0).all() && (v.array() <= 1.0).all(); };
    require(in_unit(mu0) && in_unit(mu1), "bernoulli_experiment: response outside [0,1]");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    ExperimentData e;
    e.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = w(i) == 1 ? mu1(i) : mu0(i);
        e.y(i) = unif(rng) < mu ? 1.0 : 0.0;
    }
    e.x = std::move(x);
    e.w = std::move(w);
    Vector tau = mu1 - mu0;
    e.truth = GroundTruth{std::move(mu0), std::move(mu1), std::move(tau)};
    return e;
}

// ---------------------------------------------------------------------------
// Proxy experiment standing in for a real turnout experiment

/// Voter covariates (design scale), a fair-coin treatment, and binary
/// turnout from a logistic model whose coefficients vary by experiment:
///   eta = b0 + b_age age + sum_y g_y voted_y + b_m married + b_r race
///         + W (d0 + d_age age + d_hist mean(voted))
inline ExperimentData proxy_experiment(Eigen::Index n, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double b0 = -1.2 + 0.2 * normal(rng);
    const double b_age = 0.25 + 0.1 * normal(rng);
    std::array<double, 7> g{};
    for (auto& v : g) v = 0.35 + 0.15 * normal(rng);
    const double b_m = 0.2 + 0.1 * normal(rng);
    const double b_r = -0.1 + 0.05 * normal(rng);
    const double d0 = 0.05 + 0.05 * normal(rng);
    const double d_age = 0.05 * normal(rng);
    const double d_hist = 0.2 * normal(rng);

    ExperimentData e;
    e.x = voter_design(sample_voter_covariates(n, rng));
    e.w = fair_coin_assignment(n, rng);
    e.y.resize(n);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = e.x.row(i);
        double history = 0.0, eta = b0 + b_age * row(0) + b_m * row(8) + b_r * row(9);
        for (std::size_t t = 0; t < g.size(); ++t) {
            eta += g[t] * row(static_cast<Eigen::Index>(1 + t));
            history += row(static_cast<Eigen::Index>(1 + t));
        }
        if (e.w(i) == 1) eta += d0 + d_age * row(0) + d_hist * history / 7.0;
        e.y(i) = unif(rng) < logistic(eta) ? 1.0 : 0.0;
    }
    e.feature_names = voter_feature_names();
    return e;
}

/// `count` distinct row indices in random order.
inline std::vector<Eigen::Index> sample_without_replacement(Eigen::Index size, Eigen::Index count, Rng& rng) {
    require(0 <= count && count <= size, "sample_without_replacement: count exceeds population");
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(size));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    for (Eigen::Index i = 0; i < count; ++i) {
        std::uniform_int_distribution<Eigen::Index> pick(i, size - 1);
        std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(pick(rng))]);
    }
    rows.resize(static_cast<std::size_t>(count));
    return rows;
}

// ---------------------------------------------------------------------------
// Semi-synthetic recipe

enum class SurfaceModel { linear, forest };

/// Values clipped into [0, 1], and how many needed it.
struct ClampResult {
    Vector values;
    Eigen::Index clamped = 0;
};

inline ClampResult clamp_probabilities(const Vector& v, double lo = 0.0, double hi = 1.0) {
    ClampResult r{v.cwiseMax(lo).cwiseMin(hi), 0};
    for (Eigen::Index i = 0; i < v.size(); ++i) r.clamped += (v(i) < lo || v(i) > hi) ? 1 : 0;
    return r;
}

struct SemiSyntheticReport {
    Eigen::Index clamped = 0;  // fitted probabilities moved into [0, 1]
};

/// Fits the response surfaces on each arm of `source`, samples n units of it
/// (covariates and treatment), and redraws their outcomes from the fitted
/// surfaces. Linear surfaces are least-squares probability models.
inline ExperimentData semi_synthetic(SurfaceModel model, const ExperimentData& source, Eigen::Index n, Rng& rng,
                                     const forest::ForestConfig& forest_config = {}, SemiSyntheticReport* report = nullptr) {
    source.validate();
    source.require_both_arms();
    require(n >= 1 && n <= source.size(), "semi_synthetic: n must lie in [1, source size]");
    auto fit_arm = [&](int arm) -> std::function<Vector(const Matrix&)> {
        const auto rows = source.arm_rows(arm);
        const Matrix x = gather_rows(source.x, rows);
        const Vector y = gather(source.y, rows);
        if (model == SurfaceModel::linear) {
            const Matrix design = append_constant_column(x, 1.0);
            const Vector coef = design.colPivHouseholderQr().solve(y);
            return [coef](const Matrix& q) { return Vector(append_constant_column(q, 1.0) * coef); };
        }
        auto f = std::make_shared<forest::Forest>(forest::fit_forest(x, y, forest_config, rng()));
        return [f](const Matrix& q) { return f->predict(q); };
    };
    const auto mu0_fn = fit_arm(0);
    const auto mu1_fn = fit_arm(1);

    const auto rows = sample_without_replacement(source.size(), n, rng);
    Matrix x = gather_rows(source.x, rows);
    Treatment w(n);
    for (Eigen::Index i = 0; i < n; ++i) w(i) = source.w(rows[static_cast<std::size_t>(i)]);
    const ClampResult mu0 = clamp_probabilities(mu0_fn(x));
    const ClampResult mu1 = clamp_probabilities(mu1_fn(x));
    if (report) report->clamped = mu0.clamped + mu1.clamped;
    ExperimentData e = bernoulli_experiment(std::move(x), std::move(w), mu0.values, mu1.values, rng);
    e.feature_names = source.feature_names;
    return e;
}

// ---------------------------------------------------------------------------
// Simulation with logistic-linear surfaces

inline ExperimentData sim_lm(const Matrix& x, const Vector& beta0, const Vector& beta1, Rng& rng) {
    require(beta0.size() == x.cols() && beta1.size() == x.cols(), "sim_lm: coefficient length mismatch");
    const Vector eta0 = x * beta0;
    const Vector eta1 = x * beta1;
    return bernoulli_experiment(x, fair_coin_assignment(x.rows(), rng), eta0.unaryExpr([](double v) { return logistic(v); }),
                                eta1.unaryExpr([](double v) { return logistic(v); }), rng);
}

/// mu_w(x) = logistic(x . beta_w) with beta_w ~ N(0, I) on voter covariates.
inline ExperimentData sim_lm(Eigen::Index n, Rng& rng) {
    const Matrix x = voter_design(sample_voter_covariates(n, rng));
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector beta0(kVoterWidth), beta1(kVoterWidth);
    for (auto& b : beta0) b = normal(rng);
    for (auto& b : beta1) b = normal(rng);
    ExperimentData e = sim_lm(x, beta0, beta1, rng);
    e.feature_names = voter_feature_names();
    return e;
}

// ---------------------------------------------------------------------------
// Simulation with a forest control surface and a thresholded shift

/// mu1(x) = logistic(logit(mu0(x)) + shift) where x[feature] >= threshold,
/// mu1(x) = mu0(x) elsewhere.
struct ThresholdShift {
    Eigen::Index feature = 0;
    double threshold = 0.0;
    double shift = 0.0;

    Vector apply(const Matrix& x, const Vector& mu0) const {
        Vector mu1 = mu0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if (x(i, feature) >= threshold) mu1(i) = logistic(logit(mu0(i)) + shift);
        }
        return mu1;
    }
};

inline constexpr double kForestClamp = 0.01;

/// Shift ~ N(0, variance 4), feature uniform over columns, threshold drawn
/// from the feature's observed values.
inline ThresholdShift draw_threshold_shift(const Matrix& x, Rng& rng) {
    std::uniform_int_distribution<Eigen::Index> feature(0, x.cols() - 1);
    std::uniform_int_distribution<Eigen::Index> row(0, x.rows() - 1);
    std::normal_distribution<double> shift(0.0, 2.0);
    ThresholdShift s;
    s.feature = feature(rng);
    s.threshold = x(row(rng), s.feature);
    s.shift = shift(rng);
    return s;
}

/// Forest fitted to the control arm of `source` gives mu0 (clamped into
/// [0.01, 0.99]); mu1 applies a random thresholded shift. Units are n rows of
/// `source` with fresh fair-coin treatment.
inline ExperimentData sim_rf(const ExperimentData& source, Eigen::Index n, Rng& rng,
                             const forest::ForestConfig& forest_config = {}, ThresholdShift* drawn = nullptr) {
    source.validate();
    require(n >= 1 && n <= source.size(), "sim_rf: n must lie in [1, source size]");
    const auto control = source.arm_rows(0);
    require(!control.empty(), "sim_rf: source has no control units");
    const forest::Forest f =
        forest::fit_forest(gather_rows(source.x, control), gather(source.y, control), forest_config, rng());
    const ThresholdShift shift = draw_threshold_shift(source.x, rng);
    if (drawn) *drawn = shift;

    Matrix x = gather_rows(source.x, sample_without_replacement(source.size(), n, rng));
    const Vector mu0 = clamp_probabilities(f.predict(x), kForestClamp, 1.0 - kForestClamp).values;
    Vector mu1 = shift.apply(x, mu0);
    Treatment w = fair_coin_assignment(n, rng);
    ExperimentData e = bernoulli_experiment(std::move(x), std::move(w), mu0, std::move(mu1), rng);
    e.feature_names = source.feature_names;
    return e;
}

/// sim_rf on one percent of the source units.
inline ExperimentData sim_rft(const ExperimentData& source, Rng& rng, const forest::ForestConfig& forest_config = {}) {
    return sim_rf(source, std::max<Eigen::Index>(source.size() / 100, 1), rng, forest_config);
}

// ---------------------------------------------------------------------------
// MNIST label-conditioned process

struct MnistDgpParams {
    std::array<double, 10> m{};  // control level offsets, in [-3, 3]
    std::array<double, 10> t{};  // effects, in [-1, 1]
    std::array<double, 10> p{};  // propensities, in [0.3, 0.7]

    static MnistDgpParams draw(Rng& rng) {
        MnistDgpParams params;
        std::uniform_real_distribution<double> m(-3.0, 3.0), t(-1.0, 1.0), p(0.3, 0.7);
        for (auto& v : params.m) v = m(rng);
        for (auto& v : params.t) v = t(rng);
        for (auto& v : params.p) v = p(rng);
        return params;
    }

    double mu0(int label) const { return m[static_cast<std::size_t>(label)] + 3.0 * label; }
    double mu1(int label) const { return mu0(label) + t[static_cast<std::size_t>(label)]; }

    void validate() const {
        for (std::size_t c = 0; c < 10; ++c) {
            require(std::isfinite(m[c]) && std::isfinite(t[c]), "mnist params: non-finite values");
            require(p[c] > 0.0 && p[c] < 1.0, "mnist params: propensity outside (0,1)");
        }
    }
};

/// Units with covariates `x` and digit labels: Y(0) = mu0(C) + e,
/// Y(1) = mu1(C) + e with one e ~ N(0, 1) per unit, W ~ Bern(p(C)).
inline ExperimentData mnist_dgp(const Matrix& x, const std::vector<int>& labels, const MnistDgpParams& params, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(labels.size());
    require(x.rows() == n, "mnist_dgp: covariate rows and labels differ");
    params.validate();
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    ExperimentData e;
    e.x = x;
    e.w.resize(n);
    e.y.resize(n);
    GroundTruth truth{Vector(n), Vector(n), Vector(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const int c = labels[static_cast<std::size_t>(i)];
        require(c >= 0 && c <= 9, "mnist_dgp: label " + std::to_string(c) + " outside 0..9");
        truth.mu0(i) = params.mu0(c);
        truth.mu1(i) = params.mu1(c);
        truth.tau(i) = params.t[static_cast<std::size_t>(c)];
        const double eps = noise(rng);
        e.w(i) = unif(rng) < params.p[static_cast<std::size_t>(c)] ? 1 : 0;
        e.y(i) = (e.w(i) == 1 ? truth.mu1(i) : truth.mu0(i)) + eps;
    }
    e.truth = std::move(truth);
    e.labels = labels;
    return e;
}

/// Images as rows of pixel intensities in [0, 1], average-pooled over
/// factor x factor blocks (factor 1 keeps all 784 pixels).
inline Matrix pool_images(std::span<const std::uint8_t> pixels, Eigen::Index count, int side, int factor) {
    require(factor >= 1 && side % factor == 0, "pool_images: factor must divide the image side");
    require(static_cast<Eigen::Index>(pixels.size()) == count * side * side, "pool_images: pixel buffer size mismatch");
    const int out_side = side / factor;
    Matrix x(count, out_side * out_side);
    const double norm = 255.0 * factor * factor;
    for (Eigen::Index i = 0; i < count; ++i) {
        const std::uint8_t* img = pixels.data() + i * side * side;
        for (int r = 0; r < out_side; ++r) {
            for (int c = 0; c < out_side; ++c) {
                int sum = 0;
                for (int dr = 0; dr < factor; ++dr) {
                    for (int dc = 0; dc < factor; ++dc) sum += img[(r * factor + dr) * side + c * factor + dc];
                }
                x(i, r * out_side + c) = sum / norm;
            }
        }
    }
    return x;
}

/// Image features and labels to draw MNIST units from.
struct LabeledImages {
    Matrix x;
    std::vector<int> labels;
};

inline ExperimentData sample_mnist_experiment(const LabeledImages& images, Eigen::Index n, const MnistDgpParams& params,
                                              Rng& rng) {
    require(static_cast<Eigen::Index>(images.labels.size()) == images.x.rows(), "mnist: image/label count mismatch");
    const auto rows = sample_without_replacement(images.x.rows(), n, rng);
    std::vector<int> labels;
    labels.reserve(rows.size());
    for (auto r : rows) labels.push_back(images.labels[static_cast<std::size_t>(r)]);
    return mnist_dgp(gather_rows(images.x, rows), labels, params, rng);
}

// ---------------------------------------------------------------------------
// Collections

enum class DgpKind { semi_synth_v1, semi_synth_v2, sim_lm, sim_rf, sim_rft, mnist };

inline std::string to_string(DgpKind k) {
    switch (k) {
        case DgpKind::semi_synth_v1: return "semi-synth-v1";
        case DgpKind::semi_synth_v2: return "semi-synth-v2";
        case DgpKind::sim_lm: return "sim-lm";
        case DgpKind::sim_rf: return "sim-rf";
        case DgpKind::sim_rft: return "sim-rft";
        case DgpKind::mnist: return "mnist";
    }
    return "unknown";
}

inline DgpKind dgp_from_string(const std::string& s) {
    for (DgpKind k : {DgpKind::semi_synth_v1, DgpKind::semi_synth_v2, DgpKind::sim_lm, DgpKind::sim_rf, DgpKind::sim_rft,
                      DgpKind::mnist}) {
        if (to_string(k) == s) return k;
    }
    throw Error("unknown dgp '" + s + "'");
}

struct DgpSpec {
    DgpKind kind = DgpKind::sim_lm;
    /// Units per experiment. For sim-rft this is the size of the underlying
    /// experiment; the generated one keeps one percent of it.
    Eigen::Index n_units = 1000;
    int n_experiments = 1;
    std::uint64_t seed = 0;
    /// Forest used by semi-synth-v2 and the RF simulations.
    forest::ForestConfig forest{.n_trees = 50, .bootstrap = true, .tree = {.max_depth = -1, .min_leaf_size = 20}};
    /// mnist: force t = 0 for every label.
    bool zero_effect = false;

    void validate() const {
        require(n_units >= 2, "dgp: n_units must be >= 2");
        require(n_experiments >= 1, "dgp: n_experiments must be >= 1");
    }
};

inline std::uint64_t experiment_seed(const DgpSpec& spec, int experiment) {
    return derive_seed(spec.seed, "dgp", to_string(spec.kind), experiment);
}

/// One experiment of the collection described by `spec`. `images` is
/// required for the MNIST process only.
inline ExperimentData generate_experiment(const DgpSpec& spec, int experiment, const LabeledImages* images = nullptr) {
    spec.validate();
    Rng rng(experiment_seed(spec, experiment));
    switch (spec.kind) {
        case DgpKind::sim_lm: return sim_lm(spec.n_units, rng);
        case DgpKind::semi_synth_v1:
        case DgpKind::semi_synth_v2: {
            const ExperimentData proxy = proxy_experiment(spec.n_units, rng);
            const auto model = spec.kind == DgpKind::semi_synth_v1 ? SurfaceModel::linear : SurfaceModel::forest;
            return semi_synthetic(model, proxy, spec.n_units, rng, spec.forest);
        }
        case DgpKind::sim_rf: return sim_rf(proxy_experiment(spec.n_units, rng), spec.n_units, rng, spec.forest);
        case DgpKind::sim_rft: return sim_rft(proxy_experiment(spec.n_units, rng), rng, spec.forest);
        case DgpKind::mnist: {
            require(images != nullptr, "dgp: the mnist process needs images and labels");
            MnistDgpParams params = MnistDgpParams::draw(rng);
            if (spec.zero_effect) params.t.fill(0.0);
            return sample_mnist_experiment(*images, spec.n_units, params, rng);
        }
    }
    throw Error("dgp: unknown kind");
}

inline std::vector<ExperimentData> generate_collection(const DgpSpec& spec, const LabeledImages* images = nullptr) {
    std::vector<ExperimentData> out;
    for (int j = 0; j < spec.n_experiments; ++j) out.push_back(generate_experiment(spec, j, images));
    return out;
}

}  // namespace catelab::dgp

#endif  // CATELAB_DGP_HPP
