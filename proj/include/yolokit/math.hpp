// Copyright (C) 2026 the yolokit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace yolokit {

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// d sigmoid / dx
inline double sigmoid_grad(double x) {
    const double s = sigmoid(x);
    return s * (1.0 - s);
}

// Inverse sigmoid. Domain (0, 1).
inline double logit(double p) {
    return std::log(p / (1.0 - p));
}

// log(1 + exp(x)) without overflow for large |x|.
inline double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// Subgradient weight of d/da for min(a, b) (negated, of max(a, b)):
// 1 when a is strictly active, 0.5 at an exact tie. The midpoint at ties
// makes box-overlap gradients vanish exactly when two boxes coincide.
inline double tie_step(double a, double b) {
    if (a < b) return 1.0;
    if (a == b) return 0.5;
    return 0.0;
}

// Uniform double in [0, 1) from the engine's raw 64-bit output. Unlike
// std::uniform_real_distribution the mapping is fixed by this library, so
// streams are reproducible across standard library implementations.
inline double uniform_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(rng);
}

// Integer in [lo, hi] inclusive, by rejection-free scaling. Bias is below
// 2^-53 for the ranges used here.
inline std::int64_t uniform_int_in(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
    const double u = uniform_unit(rng);
    const auto span = static_cast<double>(hi - lo + 1);
    auto k = static_cast<std::int64_t>(u * span);
    return lo + std::min(k, hi - lo);
}

// Standard normal via Box-Muller, again pinned to this library rather than
// the implementation-defined std::normal_distribution.
inline double gaussian(std::mt19937_64& rng) {
    double u1 = uniform_unit(rng);
    const double u2 = uniform_unit(rng);
    if (u1 <= 0.0) u1 = std::numeric_limits<double>::min();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

// splitmix64; used to derive independent per-image seeds from one root seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace yolokit
