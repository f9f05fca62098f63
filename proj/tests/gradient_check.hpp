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

// Test-only oracles for the network code: a straight-line scalar forward
// pass that shares nothing with the Eigen implementation, and central finite
// differences built on top of it.

#ifndef CATELAB_TESTS_GRADIENT_CHECK_HPP
#define CATELAB_TESTS_GRADIENT_CHECK_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "catelab/nn.hpp"

namespace catelab::testing {

inline double scalar_activation(nn::Activation a, double z) {
    switch (a) {
        case nn::Activation::identity: return z;
        case nn::Activation::elu: return z > 0 ? z : std::exp(z) - 1.0;
        case nn::Activation::tanh: return std::tanh(z);
        case nn::Activation::logistic: return 1.0 / (1.0 + std::exp(-z));
    }
    return z;
}

/// Evaluates one input row with plain loops over the parameters.
inline double reference_forward_row(const nn::DenseNetwork& net, const std::vector<double>& x) {
    std::vector<double> act = x;
    for (std::size_t k = 0; k < net.depth(); ++k) {
        const auto& layer = net.layer(k);
        std::vector<double> next(static_cast<std::size_t>(layer.weights.rows()));
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            double sum = layer.bias(r);
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                sum += layer.weights(r, c) * act[static_cast<std::size_t>(c)];
            }
            next[static_cast<std::size_t>(r)] = scalar_activation(net.activation_of(k), sum);
        }
        act = std::move(next);
    }
    return act.at(0);
}

inline double reference_loss(const nn::DenseNetwork& net, const Matrix& x, const Vector& y) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(x.cols()));
        for (Eigen::Index c = 0; c < x.cols(); ++c) row[static_cast<std::size_t>(c)] = x(i, c);
        const double diff = reference_forward_row(net, row) - y(i);
        total += diff * diff;
    }
    return total / static_cast<double>(x.rows());
}

/// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
/// derivative is ~0 from dividing rounding noise by nothing.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Largest relative error between backward() and central differences over
/// every parameter.
inline double max_gradient_error(const nn::DenseNetwork& net, const Matrix& x, const Vector& y, double h = 1e-5) {
    const nn::Gradients analytic = nn::backward(net, {x, y});
    double worst = 0.0;
    nn::DenseNetwork probe = net;
    for (std::size_t k = 0; k < net.depth(); ++k) {
        auto& layer = probe.mutable_layer(k);
        for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
            double& p = layer.weights.data()[i];
            const double saved = p;
            p = saved + h;
            const double up = reference_loss(probe, x, y);
            p = saved - h;
            const double down = reference_loss(probe, x, y);
            p = saved;
            worst = std::max(worst, relative_error(analytic[k].weights.data()[i], (up - down) / (2 * h)));
        }
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
            double& p = layer.bias(i);
            const double saved = p;
            p = saved + h;
            const double up = reference_loss(probe, x, y);
            p = saved - h;
            const double down = reference_loss(probe, x, y);
            p = saved;
            worst = std::max(worst, relative_error(analytic[k].bias(i), (up - down) / (2 * h)));
        }
    }
    return worst;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
    }
    return m;
}

inline Vector random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
    return random_matrix(n, 1, rng, scale).col(0);
}

}  // namespace catelab::testing

#endif  // CATELAB_TESTS_GRADIENT_CHECK_HPP
