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

// Shared training machinery for every neural learner.
//
// Networks live as blocks in a BlockPool. A prediction path is a Chain of
// block indices applied in order, so one block can be shared by several
// chains (multi-head and joint training) or frozen (frozen features).
// Gradients from any number of chains are summed per block by a
// GradientAccumulator and applied with one Adam step per block.

#ifndef CATELAB_TRAINING_HPP
#define CATELAB_TRAINING_HPP

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "catelab/common.hpp"
#include "catelab/data.hpp"
#include "catelab/nn.hpp"

namespace catelab::training {

/// Networks are trained on (y - shift) / scale and report shift + scale * output.
struct OutputScale {
    double shift = 0.0;
    double scale = 1.0;

    Vector to_model(const Vector& y) const { return (y.array() - shift) / scale; }
    Vector from_model(const Vector& v) const { return (v.array() * scale + shift).matrix(); }

    friend bool operator==(const OutputScale&, const OutputScale&) = default;
};

/// Mean/standard deviation of `y`; identity when y is (nearly) constant.
inline OutputScale standardizing_scale(const Vector& y) {
    if (y.size() == 0) return {};
    const double mean = y.mean();
    const double var = (y.array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12)) return {mean, 1.0};
    return {mean, sd};
}

/// Default architecture: two ELU hidden layers of width 64.
struct NetworkSpec {
    std::vector<Eigen::Index> hidden{64, 64};
    nn::Activation hidden_activation = nn::Activation::elu;
    nn::Activation output_activation = nn::Activation::identity;
    nn::InitOptions init{};

    std::size_t depth() const { return hidden.size() + 1; }

    nn::DenseNetwork build(Eigen::Index input_width, Rng& rng) const {
        std::vector<Eigen::Index> widths{input_width};
        widths.insert(widths.end(), hidden.begin(), hidden.end());
        widths.push_back(1);
        return nn::make_network(std::span<const Eigen::Index>(widths), hidden_activation, output_activation, rng,
                                init);
    }
};

struct TrainConfig {
    int max_iters = 10000;
    int batch_size = 64;
    nn::AdamConfig adam{};
    /// Stop once the mean loss of a window of this many steps improves on the
    /// previous window by less than plateau_tol (relative). 0 disables.
    int plateau_window = 500;
    double plateau_tol = 1e-5;

    void validate() const {
        require(max_iters >= 0, "train config: max_iters must be >= 0");
        require(batch_size >= 1, "train config: batch_size must be >= 1");
        require(plateau_window >= 0, "train config: plateau_window must be >= 0");
        adam.validate();
    }
};

struct Block {
    nn::DenseNetwork net;
    nn::AdamState adam;
    bool frozen = false;
};

class BlockPool {
public:
    std::size_t add(nn::DenseNetwork net, const nn::AdamConfig& adam, bool frozen = false) {
        nn::AdamState state = nn::AdamState::for_network(net, adam);
        blocks_.push_back(Block{std::move(net), std::move(state), frozen});
        return blocks_.size() - 1;
    }

    Block& at(std::size_t i) { return blocks_.at(i); }
    const Block& at(std::size_t i) const { return blocks_.at(i); }
    std::size_t size() const { return blocks_.size(); }

    /// Fresh moments and step counters, parameters untouched.
    void reset_optimizers() {
        for (auto& b : blocks_) b.adam = nn::AdamState::for_network(b.net, b.adam.config);
    }

private:
    std::vector<Block> blocks_;
};

using Chain = std::vector<std::size_t>;

inline Matrix forward_chain(const BlockPool& pool, const Chain& chain, const Matrix& x) {
    require(!chain.empty(), "forward_chain: empty chain");
    Matrix act = nn::forward_batch(pool.at(chain.front()).net, x);
    for (std::size_t i = 1; i < chain.size(); ++i) act = nn::forward_batch(pool.at(chain[i]).net, act);
    return act;
}

inline Vector predict_chain(const BlockPool& pool, const Chain& chain, const Matrix& x) {
    return forward_chain(pool, chain, x).col(0);
}

class GradientAccumulator {
public:
    explicit GradientAccumulator(std::size_t blocks = 0) : grads_(blocks) {}

    void add(std::size_t block, const nn::Gradients& g) {
        if (grads_.size() <= block) grads_.resize(block + 1);
        if (grads_[block]) {
            nn::add_gradients(*grads_[block], g);
        } else {
            grads_[block] = g;
        }
    }

    const std::optional<nn::Gradients>& get(std::size_t block) const { return grads_.at(block); }
    bool touched(std::size_t block) const { return block < grads_.size() && grads_[block].has_value(); }

    /// One Adam step for every block that received gradients, then reset.
    void apply(BlockPool& pool) {
        for (std::size_t b = 0; b < grads_.size(); ++b) {
            if (!grads_[b]) continue;
            Block& block = pool.at(b);
            if (!block.frozen) nn::adam_step(block.net, block.adam, *grads_[b]);
            grads_[b].reset();
        }
    }

    void clear() {
        for (auto& g : grads_) g.reset();
    }

private:
    std::vector<std::optional<nn::Gradients>> grads_;
};

/// Adds the gradient of mse(chain(x), targets) to `acc` for every trainable
/// block of the chain and returns the loss. Frozen blocks receive nothing;
/// backpropagation stops at the earliest trainable block.
inline double accumulate_chain_mse(const BlockPool& pool, const Chain& chain, const Matrix& x, const Vector& targets,
                                   GradientAccumulator& acc) {
    require(!chain.empty(), "accumulate_chain_mse: empty chain");
    require(x.rows() == targets.size() && x.rows() >= 1, "accumulate_chain_mse: batch size mismatch");
    require(targets.allFinite(), "accumulate_chain_mse: non-finite targets");
    std::vector<nn::ForwardTrace> traces;
    traces.reserve(chain.size());
    const Matrix* input = &x;
    for (std::size_t b : chain) {
        traces.push_back(nn::forward_trace(pool.at(b).net, *input));
        input = &traces.back().output();
    }
    const Vector predictions = traces.back().output().col(0);
    const double loss = nn::loss_mse(predictions, targets);

    std::size_t first_trainable = chain.size();
    for (std::size_t i = 0; i < chain.size(); ++i) {
        if (!pool.at(chain[i]).frozen) {
            first_trainable = i;
            break;
        }
    }
    if (first_trainable == chain.size()) return loss;

    Matrix grad = nn::mse_output_gradient(predictions, targets);
    for (std::size_t i = chain.size(); i-- > first_trainable;) {
        const Block& block = pool.at(chain[i]);
        auto result = nn::backward_from(block.net, traces[i], grad, i > first_trainable);
        if (!block.frozen) acc.add(chain[i], result.gradients);
        if (i > first_trainable) grad = std::move(result.input_gradient);
    }
    return loss;
}

/// Row indices for one minibatch: every row when the pool is no larger than
/// the batch, otherwise `batch` draws with replacement.
inline std::vector<Eigen::Index> sample_rows(std::span<const Eigen::Index> pool, int batch, Rng& rng) {
    require(!pool.empty(), "sample_rows: empty pool");
    if (pool.size() <= static_cast<std::size_t>(batch)) return {pool.begin(), pool.end()};
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(batch));
    for (auto& r : rows) r = pool[pick(rng)];
    return rows;
}

inline std::vector<Eigen::Index> all_rows(Eigen::Index n) {
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
    return rows;
}

/// Early stopping on a loss plateau.
class PlateauMonitor {
public:
    PlateauMonitor(int window, double tol) : window_(window), tol_(tol) {}

    /// Records one step's loss; true when training should stop.
    bool record(double loss) {
        if (window_ <= 0) return false;
        sum_ += loss;
        if (++count_ < window_) return false;
        const double mean = sum_ / static_cast<double>(window_);
        sum_ = 0.0;
        count_ = 0;
        const bool stop = previous_ && (*previous_ <= 0.0 || (*previous_ - mean) / *previous_ < tol_);
        previous_ = mean;
        return stop || mean == 0.0;
    }

private:
    int window_;
    double tol_;
    double sum_ = 0.0;
    int count_ = 0;
    std::optional<double> previous_;
};

}  // namespace catelab::training

#endif  // CATELAB_TRAINING_HPP
