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

#ifndef CATELAB_COMMON_HPP
#define CATELAB_COMMON_HPP

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

namespace catelab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Pseudo-random engine used everywhere. All randomness is passed in
/// explicitly; nothing in the library touches a global generator.
using Rng = std::mt19937_64;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw Error(message);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a; stable across platforms and runs, unlike std::hash.
inline std::uint64_t stable_hash(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed) { return splitmix64(seed); }

/// Combines a parent seed with any number of integer or string keys.
/// Order matters: derive_seed(s, a, b) != derive_seed(s, b, a) in general.
template <typename First, typename... Rest>
std::uint64_t derive_seed(std::uint64_t seed, const First& first, const Rest&... rest) {
    std::uint64_t key;
    if constexpr (std::is_convertible_v<const First&, std::string_view>) {
        key = stable_hash(std::string_view(first));
    } else {
        key = static_cast<std::uint64_t>(first);
    }
    const std::uint64_t mixed = splitmix64(seed ^ splitmix64(key + 0x632be59bd9b4e019ULL));
    if constexpr (sizeof...(rest) == 0) {
        return mixed;
    } else {
        return derive_seed(mixed, rest...);
    }
}

inline double logistic(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double value) {
    std::array<char, 64> buffer{};
    auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
    if (ec != std::errc()) throw Error("format_double: conversion failed");
    return std::string(buffer.data(), end);
}

inline double parse_double(std::string_view text) {
    double value = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size()) {
        throw Error("not a number: '" + std::string(text) + "'");
    }
    return value;
}

inline double median(std::vector<double> values) {
    require(!values.empty(), "median of empty sample");
    const std::size_t n = values.size();
    const std::size_t mid = n / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

/// Linear-interpolated quantile (type 7), q in [0, 1].
inline double quantile(std::vector<double> values, double q) {
    require(!values.empty(), "quantile of empty sample");
    require(q >= 0.0 && q <= 1.0, "quantile: q outside [0,1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace catelab

#endif  // CATELAB_COMMON_HPP
