#pragma once

#include <span>

namespace wrecon {

// Inputs are `samples` consecutive blocks of equal length M. Each metric is
// computed per sample and then averaged over samples.

/// (1/B) sum_i sqrt((1/M) sum_j (p_ij - t_ij)^2)
double rmse(std::span<const double> preds, std::span<const double> targets, int samples);

/// (1/B) sum_i (1/M) sum_j |p_ij - t_ij|
double mae(std::span<const double> preds, std::span<const double> targets, int samples);

struct PccResult {
    double value = 0;
    int skipped = 0;  // samples with a constant prediction or target
};

/// Mean per-sample Pearson coefficient over non-degenerate samples, clamped
/// to [-1, 1]. Throws DataError when every sample is degenerate.
PccResult pcc(std::span<const double> preds, std::span<const double> targets, int samples);

}  // namespace wrecon
