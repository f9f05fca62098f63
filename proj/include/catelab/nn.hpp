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

// Dense feed-forward regression networks.
//
// A network is an ordered list of affine layers. Every layer except the last
// applies the hidden activation; the last applies the output activation
// (identity for continuous outcomes, logistic for probabilities, or a hidden
// activation when the network is a feature block feeding another network).
//
// Gradients are exact reverse-mode derivatives of the mean squared error.
// Everything is double precision.

#ifndef CATELAB_NN_HPP
#define CATELAB_NN_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "catelab/common.hpp"

namespace catelab::nn {

enum class Activation { identity, elu, tanh, logistic };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::elu: return "elu";
        case Activation::tanh: return "tanh";
        case Activation::logistic: return "logistic";
    }
    return "unknown";
}

inline Activation activation_from_string(const std::string& name) {
    if (name == "identity") return Activation::identity;
    if (name == "elu") return Activation::elu;
    if (name == "tanh") return Activation::tanh;
    if (name == "logistic") return Activation::logistic;
    throw Error("unknown activation '" + name + "'");
}

inline double activate(Activation a, double z) {
    switch (a) {
        case Activation::identity: return z;
        case Activation::elu: return z > 0.0 ? z : std::expm1(z);
        case Activation::tanh: return std::tanh(z);
        case Activation::logistic: return logistic(z);
    }
    return z;
}

/// Derivative expressed through the activation's output value, which is all
/// the backward pass keeps around.
inline double activation_slope(Activation a, double out) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::elu: return out > 0.0 ? 1.0 : out + 1.0;
        case Activation::tanh: return 1.0 - out * out;
        case Activation::logistic: return out * (1.0 - out);
    }
    return 1.0;
}

struct LayerParams {
    Matrix weights;  // out_width x in_width
    Vector bias;     // out_width

    Eigen::Index in_width() const { return weights.cols(); }
    Eigen::Index out_width() const { return weights.rows(); }
};

/// Same shapes as the network's parameters.
using Gradients = std::vector<LayerParams>;

class DenseNetwork {
public:
    DenseNetwork() = default;

    DenseNetwork(std::vector<LayerParams> layers, Activation hidden, Activation output)
        : layers_(std::move(layers)), hidden_(hidden), output_(output) {
        validate();
    }

    std::size_t depth() const { return layers_.size(); }
    Eigen::Index input_width() const { return layers_.front().in_width(); }
    Eigen::Index output_width() const { return layers_.back().out_width(); }
    Activation hidden_activation() const { return hidden_; }
    Activation output_activation() const { return output_; }

    Activation activation_of(std::size_t layer) const {
        return layer + 1 == layers_.size() ? output_ : hidden_;
    }

    const std::vector<LayerParams>& layers() const { return layers_; }
    const LayerParams& layer(std::size_t i) const { return layers_.at(i); }

    /// Mutable access for optimizers. Callers must keep shapes unchanged.
    LayerParams& mutable_layer(std::size_t i) { return layers_.at(i); }

    std::vector<Eigen::Index> widths() const {
        std::vector<Eigen::Index> w;
        w.reserve(layers_.size() + 1);
        w.push_back(input_width());
        for (const auto& l : layers_) w.push_back(l.out_width());
        return w;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
        return n;
    }

    bool parameters_finite() const {
        for (const auto& l : layers_) {
            if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
        }
        return true;
    }

    void validate() const {
        require(!layers_.empty(), "network needs at least one layer");
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            const auto& l = layers_[k];
            require(l.weights.rows() >= 1 && l.weights.cols() >= 1, "layer " + std::to_string(k) + " is empty");
            require(l.bias.size() == l.weights.rows(), "layer " + std::to_string(k) + ": bias width mismatch");
            if (k > 0) {
                require(layers_[k - 1].out_width() == l.in_width(),
                        "layer " + std::to_string(k) + ": input width does not match previous layer");
            }
        }
        require(parameters_finite(), "network has non-finite parameters");
    }

    /// Same architecture, same activations.
    bool same_structure(const DenseNetwork& other) const {
        return hidden_ == other.hidden_ && output_ == other.output_ && widths() == other.widths();
    }

    friend bool operator==(const DenseNetwork& a, const DenseNetwork& b) {
        if (!a.same_structure(b)) return false;
        for (std::size_t k = 0; k < a.depth(); ++k) {
            if (a.layers_[k].weights != b.layers_[k].weights || a.layers_[k].bias != b.layers_[k].bias) {
                return false;
            }
        }
        return true;
    }

private:
    std::vector<LayerParams> layers_;
    Activation hidden_ = Activation::elu;
    Activation output_ = Activation::identity;
};

struct InitOptions {
    /// Weights ~ U(-a, a) with a = gain * sqrt(3 / fan_in), i.e. variance
    /// gain^2 / fan_in. Biases start at zero.
    double gain = 1.0;
    bool zero_output_layer = false;
};

/// widths = {input, hidden..., output}; at least two entries.
inline DenseNetwork make_network(std::span<const Eigen::Index> widths, Activation hidden, Activation output,
                                 Rng& rng, InitOptions options = {}) {
    require(widths.size() >= 2, "make_network: need input and output widths");
    std::vector<LayerParams> layers;
    layers.reserve(widths.size() - 1);
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
        const Eigen::Index in = widths[k];
        const Eigen::Index out = widths[k + 1];
        require(in >= 1 && out >= 1, "make_network: widths must be positive");
        LayerParams layer{Matrix::Zero(out, in), Vector::Zero(out)};
        const bool is_output = k + 2 == widths.size();
        if (!(is_output && options.zero_output_layer)) {
            const double bound = options.gain * std::sqrt(3.0 / static_cast<double>(in));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (Eigen::Index c = 0; c < in; ++c) {
                for (Eigen::Index r = 0; r < out; ++r) layer.weights(r, c) = dist(rng);
            }
        }
        layers.push_back(std::move(layer));
    }
    return DenseNetwork(std::move(layers), hidden, output);
}

inline DenseNetwork make_network(std::initializer_list<Eigen::Index> widths, Activation hidden, Activation output,
                                 Rng& rng, InitOptions options = {}) {
    const std::vector<Eigen::Index> w(widths);
    return make_network(std::span<const Eigen::Index>(w), hidden, output, rng, options);
}

/// activations[0] is the input batch, activations[k + 1] the output of layer k.
struct ForwardTrace {
    std::vector<Matrix> activations;

    const Matrix& output() const { return activations.back(); }
};

inline ForwardTrace forward_trace(const DenseNetwork& net, const Matrix& inputs) {
    require(inputs.cols() == net.input_width(),
            "forward: input width " + std::to_string(inputs.cols()) + " does not match network input width " +
                std::to_string(net.input_width()));
    ForwardTrace trace;
    trace.activations.reserve(net.depth() + 1);
    trace.activations.push_back(inputs);
    for (std::size_t k = 0; k < net.depth(); ++k) {
        const auto& layer = net.layer(k);
        Matrix z = trace.activations.back() * layer.weights.transpose();
        z.rowwise() += layer.bias.transpose();
        const Activation act = net.activation_of(k);
        if (act != Activation::identity) {
            z = z.unaryExpr([act](double v) { return activate(act, v); });
        }
        trace.activations.push_back(std::move(z));
    }
    require(trace.output().allFinite(), "forward: non-finite network output");
    return trace;
}

/// Batch of outputs, one row per input row.
inline Matrix forward_batch(const DenseNetwork& net, const Matrix& inputs) {
    return std::move(forward_trace(net, inputs).activations.back());
}

/// Predictions of a single-output network.
inline Vector forward(const DenseNetwork& net, const Matrix& inputs) {
    require(net.output_width() == 1, "forward: network has more than one output");
    Matrix out = forward_batch(net, inputs);
    return out.col(0);
}

inline double loss_mse(const Vector& predictions, const Vector& targets) {
    require(predictions.size() >= 1, "loss_mse: empty input");
    require(predictions.size() == targets.size(), "loss_mse: length mismatch");
    return (predictions - targets).squaredNorm() / static_cast<double>(predictions.size());
}

inline Gradients zero_gradients(const DenseNetwork& net) {
    Gradients g;
    g.reserve(net.depth());
    for (const auto& l : net.layers()) {
        g.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.bias.size())});
    }
    return g;
}

inline void add_gradients(Gradients& into, const Gradients& g) {
    require(into.size() == g.size(), "add_gradients: layer count mismatch");
    for (std::size_t k = 0; k < g.size(); ++k) {
        into[k].weights += g[k].weights;
        into[k].bias += g[k].bias;
    }
}

struct BackwardResult {
    Gradients gradients;
    Matrix input_gradient;  // empty unless requested
};

/// Propagates dLoss/dOutput (batch x out_width) back through a recorded
/// forward pass.
inline BackwardResult backward_from(const DenseNetwork& net, const ForwardTrace& trace, const Matrix& output_gradient,
                                    bool want_input_gradient = false) {
    require(trace.activations.size() == net.depth() + 1, "backward: trace does not belong to this network");
    require(output_gradient.rows() == trace.output().rows() && output_gradient.cols() == trace.output().cols(),
            "backward: output gradient shape mismatch");
    BackwardResult result;
    result.gradients.resize(net.depth());
    Matrix delta = output_gradient;
    for (std::size_t k = net.depth(); k-- > 0;) {
        const Activation act = net.activation_of(k);
        const Matrix& out = trace.activations[k + 1];
        if (act != Activation::identity) {
            delta.array() *= out.unaryExpr([act](double v) { return activation_slope(act, v); }).array();
        }
        const Matrix& in = trace.activations[k];
        result.gradients[k].weights = delta.transpose() * in;
        result.gradients[k].bias = delta.colwise().sum().transpose();
        if (k > 0 || want_input_gradient) {
            delta = delta * net.layer(k).weights;
        }
    }
    if (want_input_gradient) result.input_gradient = std::move(delta);
    for (const auto& g : result.gradients) {
        require(g.weights.allFinite() && g.bias.allFinite(), "backward: non-finite gradient");
    }
    return result;
}

/// dLoss/dPredictions for the mean squared error.
inline Matrix mse_output_gradient(const Vector& predictions, const Vector& targets) {
    require(predictions.size() == targets.size() && predictions.size() >= 1, "mse gradient: length mismatch");
    Matrix g = (2.0 / static_cast<double>(predictions.size())) * (predictions - targets);
    return g;
}

struct Batch {
    Matrix inputs;   // batch x d
    Vector targets;  // batch
};

/// Exact gradient of loss_mse(forward(net, batch.inputs), batch.targets).
inline Gradients backward(const DenseNetwork& net, const Batch& batch) {
    require(batch.inputs.rows() >= 1, "backward: empty batch");
    require(batch.inputs.rows() == batch.targets.size(), "backward: inputs/targets length mismatch");
    require(batch.inputs.allFinite() && batch.targets.allFinite(), "backward: non-finite batch");
    require(net.output_width() == 1, "backward: network has more than one output");
    const ForwardTrace trace = forward_trace(net, batch.inputs);
    const Vector predictions = trace.output().col(0);
    return backward_from(net, trace, mse_output_gradient(predictions, batch.targets)).gradients;
}

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        require(lr > 0.0 && eps > 0.0, "adam: lr and eps must be positive");
        require(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0, "adam: betas must lie in (0,1)");
    }
};

struct AdamState {
    AdamConfig config;
    Gradients first_moment;
    Gradients second_moment;
    std::uint64_t step_count = 0;

    static AdamState for_network(const DenseNetwork& net, AdamConfig config = {}) {
        config.validate();
        return AdamState{config, zero_gradients(net), zero_gradients(net), 0};
    }
};

inline bool same_shapes(const Gradients& a, const DenseNetwork& net) {
    if (a.size() != net.depth()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const auto& l = net.layer(k);
        if (a[k].weights.rows() != l.weights.rows() || a[k].weights.cols() != l.weights.cols() ||
            a[k].bias.size() != l.bias.size()) {
            return false;
        }
    }
    return true;
}

/// One Adam update with bias correction.
inline void adam_step(DenseNetwork& net, AdamState& state, const Gradients& grads) {
    require(same_shapes(grads, net), "adam_step: gradient shapes do not match network");
    require(same_shapes(state.first_moment, net) && same_shapes(state.second_moment, net),
            "adam_step: optimizer state does not belong to this network");
    const AdamConfig& c = state.config;
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);

    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
        param.array() -= c.lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + c.eps);
    };
    for (std::size_t k = 0; k < net.depth(); ++k) {
        auto& layer = net.mutable_layer(k);
        update(layer.weights, state.first_moment[k].weights, state.second_moment[k].weights, grads[k].weights);
        update(layer.bias, state.first_moment[k].bias, state.second_moment[k].bias, grads[k].bias);
    }
    require(net.parameters_finite(), "adam_step: parameters became non-finite");
}

inline DenseNetwork clone_params(const DenseNetwork& net) { return net; }

inline LayerParams interpolate_layer(const LayerParams& a, const LayerParams& b, double e) {
    return {a.weights + e * (b.weights - a.weights), a.bias + e * (b.bias - a.bias)};
}

/// Same update on flat parameter vectors with one scalar step.
inline Vector interpolate_flat(const Vector& a, const Vector& b, double e) {
    require(a.size() == b.size(), "interpolate_flat: size mismatch");
    require(e >= 0.0 && e <= 1.0, "interpolate_flat: epsilon outside [0,1]");
    return e == 1.0 ? b : Vector(a + e * (b - a));
}

/// Layer p of the result is eps[p] * b_p + (1 - eps[p]) * a_p, evaluated as
/// a_p + eps[p] * (b_p - a_p) so that eps = 0 and a == b return a exactly.
inline DenseNetwork interpolate_params(const DenseNetwork& a, const DenseNetwork& b, std::span<const double> eps) {
    require(a.same_structure(b), "interpolate_params: networks differ in structure");
    require(eps.size() == a.depth(), "interpolate_params: need one epsilon per layer (" + std::to_string(a.depth()) +
                                         "), got " + std::to_string(eps.size()));
    DenseNetwork out = a;
    for (std::size_t p = 0; p < a.depth(); ++p) {
        const double e = eps[p];
        require(e >= 0.0 && e <= 1.0, "interpolate_params: epsilon outside [0,1]");
        auto& layer = out.mutable_layer(p);
        layer = e == 1.0 ? b.layer(p) : interpolate_layer(a.layer(p), b.layer(p), e);
    }
    return out;
}

/// All parameters in one vector: per layer, weights column-major then bias.
inline Vector flatten_params(const DenseNetwork& net) {
    Vector flat(static_cast<Eigen::Index>(net.parameter_count()));
    Eigen::Index pos = 0;
    for (const auto& l : net.layers()) {
        flat.segment(pos, l.weights.size()) = l.weights.reshaped();
        pos += l.weights.size();
        flat.segment(pos, l.bias.size()) = l.bias;
        pos += l.bias.size();
    }
    return flat;
}

inline void assign_flat_params(DenseNetwork& net, const Vector& flat) {
    require(flat.size() == static_cast<Eigen::Index>(net.parameter_count()), "assign_flat_params: size mismatch");
    Eigen::Index pos = 0;
    for (std::size_t k = 0; k < net.depth(); ++k) {
        auto& l = net.mutable_layer(k);
        l.weights.reshaped() = flat.segment(pos, l.weights.size());
        pos += l.weights.size();
        l.bias = flat.segment(pos, l.bias.size());
        pos += l.bias.size();
    }
    require(net.parameters_finite(), "assign_flat_params: non-finite parameters");
}

/// Splits after the first `k` layers. The front block keeps the hidden
/// activation on its last layer so it can feed the back block unchanged.
inline std::pair<DenseNetwork, DenseNetwork> split_network(const DenseNetwork& net, std::size_t k) {
    require(k >= 1 && k < net.depth(), "split_network: split point must satisfy 1 <= k < depth");
    std::vector<LayerParams> front(net.layers().begin(), net.layers().begin() + static_cast<std::ptrdiff_t>(k));
    std::vector<LayerParams> back(net.layers().begin() + static_cast<std::ptrdiff_t>(k), net.layers().end());
    return {DenseNetwork(std::move(front), net.hidden_activation(), net.hidden_activation()),
            DenseNetwork(std::move(back), net.hidden_activation(), net.output_activation())};
}

// Snapshot format: {"hidden_activation", "output_activation", "layers": [
//   {"in": n, "out": m, "weights": [row-major m*n values], "bias": [m values]}]}
// Values are written with full round-trip precision.

inline nlohmann::json to_json(const DenseNetwork& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net.layers()) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weights.size()));
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
        }
        std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
        layers.push_back({{"in", l.in_width()}, {"out", l.out_width()}, {"weights", w}, {"bias", b}});
    }
    return {{"hidden_activation", to_string(net.hidden_activation())},
            {"output_activation", to_string(net.output_activation())},
            {"layers", layers}};
}

inline DenseNetwork network_from_json(const nlohmann::json& j) {
    std::vector<LayerParams> layers;
    for (const auto& jl : j.at("layers")) {
        const auto in = jl.at("in").get<Eigen::Index>();
        const auto out = jl.at("out").get<Eigen::Index>();
        const auto w = jl.at("weights").get<std::vector<double>>();
        const auto b = jl.at("bias").get<std::vector<double>>();
        require(static_cast<Eigen::Index>(w.size()) == in * out && static_cast<Eigen::Index>(b.size()) == out,
                "network snapshot: layer sizes do not match declared widths");
        LayerParams l{Matrix(out, in), Vector(out)};
        for (Eigen::Index r = 0; r < out; ++r) {
            for (Eigen::Index c = 0; c < in; ++c) l.weights(r, c) = w[static_cast<std::size_t>(r * in + c)];
            l.bias(r) = b[static_cast<std::size_t>(r)];
        }
        layers.push_back(std::move(l));
    }
    return DenseNetwork(std::move(layers), activation_from_string(j.at("hidden_activation").get<std::string>()),
                        activation_from_string(j.at("output_activation").get<std::string>()));
}

}  // namespace catelab::nn

#endif  // CATELAB_NN_HPP
