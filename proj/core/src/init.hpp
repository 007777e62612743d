#pragma once

#include <cmath>
#include <random>

#include "wrecon/tensor.hpp"

namespace wrecon::detail {

/// Zero-mean normal initialization with the given standard deviation.
template <typename T>
Tensor<T> normal_init(Shape shape, double stddev, std::mt19937_64& rng) {
    Tensor<T> t(std::move(shape));
    if (stddev == 0) return t;
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : t.data) v = static_cast<T>(dist(rng));
    return t;
}

/// He-style initialization for a layer with `fan_in` inputs, scaled by `gain`.
template <typename T>
Tensor<T> he_init(Shape shape, int fan_in, std::mt19937_64& rng, double gain = 1.0) {
    return normal_init<T>(std::move(shape), gain * std::sqrt(2.0 / fan_in), rng);
}

}  // namespace wrecon::detail
