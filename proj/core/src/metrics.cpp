#include "wrecon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wrecon/errors.hpp"

namespace wrecon {

namespace {

std::size_t block_size(std::span<const double> p, std::span<const double> t, int samples, const char* what) {
    if (p.size() != t.size())
        throw DataError(std::string(what) + ": predictions have " + std::to_string(p.size()) + " values, targets " +
                        std::to_string(t.size()));
    if (samples < 1 || p.empty()) throw DataError(std::string(what) + ": empty input");
    if (p.size() % static_cast<std::size_t>(samples) != 0)
        throw DataError(std::string(what) + ": " + std::to_string(p.size()) + " values do not split into " +
                        std::to_string(samples) + " samples");
    return p.size() / static_cast<std::size_t>(samples);
}

}  // namespace

double rmse(std::span<const double> preds, std::span<const double> targets, int samples) {
    const std::size_t m = block_size(preds, targets, samples, "rmse");
    double total = 0;
    for (int i = 0; i < samples; ++i) {
        double s = 0;
        for (std::size_t j = i * m; j < (i + 1) * m; ++j) {
            const double d = preds[j] - targets[j];
            s += d * d;
        }
        total += std::sqrt(s / static_cast<double>(m));
    }
    return total / samples;
}

double mae(std::span<const double> preds, std::span<const double> targets, int samples) {
    const std::size_t m = block_size(preds, targets, samples, "mae");
    double total = 0;
    for (int i = 0; i < samples; ++i) {
        double s = 0;
        for (std::size_t j = i * m; j < (i + 1) * m; ++j) s += std::abs(preds[j] - targets[j]);
        total += s / static_cast<double>(m);
    }
    return total / samples;
}

PccResult pcc(std::span<const double> preds, std::span<const double> targets, int samples) {
    const std::size_t m = block_size(preds, targets, samples, "pcc");
    PccResult r;
    double total = 0;
    int used = 0;
    for (int i = 0; i < samples; ++i) {
        const auto p = preds.subspan(i * m, m);
        const auto t = targets.subspan(i * m, m);
        double pm = 0, tm = 0;
        for (std::size_t j = 0; j < m; ++j) {
            pm += p[j];
            tm += t[j];
        }
        pm /= static_cast<double>(m);
        tm /= static_cast<double>(m);
        double num = 0, sp = 0, st = 0;
        for (std::size_t j = 0; j < m; ++j) {
            const double a = p[j] - pm, b = t[j] - tm;
            num += a * b;
            sp += a * a;
            st += b * b;
        }
        if (!(sp > 0) || !(st > 0)) {
            ++r.skipped;
            continue;
        }
        total += std::clamp(num / std::sqrt(sp * st), -1.0, 1.0);
        ++used;
    }
    if (used == 0) throw DataError("pcc: every sample has a constant prediction or target");
    r.value = std::clamp(total / used, -1.0, 1.0);
    return r;
}

}  // namespace wrecon
