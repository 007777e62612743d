#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wrecon/graph.hpp"

namespace wrecon {

struct GradCheckEntry {
    std::string param;
    std::size_t index = 0;
    double analytic = 0;
    double numeric = 0;
    double rel_error = 0;
};

struct GradCheckReport {
    bool passed = true;
    std::size_t checked = 0;
    GradCheckEntry worst;
    std::string failure;  // set when a gradient is non-finite
};

struct GradCheckOptions {
    double eps = 1e-6;
    double tol = 1e-5;
    /// Entries drawn uniformly over all parameters; 0 checks every entry.
    std::size_t samples = 0;
    std::uint64_t seed = 0;
};

/// Builds the scalar loss on the given graph. Must be deterministic.
using LossBuilder = std::function<Var(Graph<double>&)>;

/// Compares reverse-mode gradients against central differences,
/// |analytic - numeric| / max(1, |numeric|) <= tol for every sampled entry.
GradCheckReport grad_check(ParamStore<double>& params, const LossBuilder& loss, const GradCheckOptions& opts);

}  // namespace wrecon
