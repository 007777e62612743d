#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <random>
#include <string>
#include <vector>

namespace wrecon {

/// Probability table over (w, x_1, ..., x_N); variable 0 is w. Row-major with
/// the last variable varying fastest.
struct DiscreteJoint {
    std::vector<int> cards;
    std::vector<double> p;

    int num_vars() const { return static_cast<int>(cards.size()); }
    /// Throws DataError on negative entries, wrong size or a sum off 1 by more than 1e-9.
    void validate() const;
};

/// H(w | X_S) in nats with 0 ln 0 = 0. `given` holds variable indices >= 1.
double cond_entropy(const DiscreteJoint& joint, const std::vector<int>& given);

struct MonotonicityReport {
    std::vector<std::vector<int>> chain;
    std::vector<double> entropies;  // H(w | X_{S_i})
    std::vector<double> gaps;       // H(S_i) - H(S_{i+1}) = I(w; X_add | X_{S_i})
    bool monotone = true;           // every gap >= -tolerance
    double min_gap = 0;

    nlohmann::json to_json() const;
};

/// `chain` must be strictly nested (S_1 subset of S_2 ...), else DataError.
MonotonicityReport verify_monotonicity(const DiscreteJoint& joint, const std::vector<std::vector<int>>& chain,
                                       double tolerance = 1e-9);

/// Multivariate normal over (w, x_1, ..., x_N); covariance row-major n x n.
struct GaussianSystem {
    std::vector<double> mean;
    std::vector<double> cov;

    int num_vars() const { return static_cast<int>(mean.size()); }
    /// Throws DataError unless the covariance is symmetric positive definite.
    void validate() const;
};

/// Schur complement variance of w given X_S. Throws DataError when the
/// conditioning block is singular.
double gaussian_cond_variance(const GaussianSystem& sys, const std::vector<int>& given);
/// 0.5 ln(2 pi e sigma^2); -infinity when the conditional variance vanishes.
double gaussian_cond_entropy(const GaussianSystem& sys, const std::vector<int>& given);

/// Random joint drawn uniformly from the probability simplex.
DiscreteJoint random_joint(const std::vector<int>& cards, std::mt19937_64& rng);
/// p(x1) p(w | x1) p(x2 | x1) over (w, x1, x2): w and x2 independent given x1.
DiscreteJoint conditionally_independent_joint(int q, std::mt19937_64& rng);
GaussianSystem random_gaussian(int n, std::mt19937_64& rng);

/// Empirical joint of integer-coded columns; column 0 is w.
DiscreteJoint empirical_joint(const std::vector<std::vector<int>>& columns, const std::vector<int>& cards);
/// Equal-frequency binning into `bins` levels (edges at empirical quantiles).
std::vector<int> quantile_bins(const std::vector<double>& values, int bins);

struct EntropySuiteOptions {
    int trials = 100;              // discrete, Gaussian and plug-in trials each
    int independence_trials = 10;
    int bins = 8;
    int samples = 100000;          // pixel samples per plug-in trial
    int grid = 16;                 // synthetic grid edge for plug-in trials
    std::uint64_t seed = 0;
    double tolerance = 1e-9;
};

struct SuiteSection {
    std::string name;
    int trials = 0;
    int passed = 0;
    double min_gap = 0;
    double max_abs_gap = 0;

    nlohmann::json to_json() const;
};

struct EntropySuiteReport {
    SuiteSection discrete;      // random exact joints: every gap >= -tol
    SuiteSection independence;  // constructed w _|_ x2 | x1: |gap| <= tol
    SuiteSection gaussian;      // closed-form chains
    SuiteSection plugin;        // plug-in estimates on synthetic ocean pixels
    double plugin_mean_information = 0;  // mean H(w) - H(w | SSH,U,V,B)
    std::vector<std::string> plugin_chain;

    /// All exact sections pass every trial and plug-in passes at least 95%.
    bool passed() const;
    nlohmann::json to_json() const;
};

EntropySuiteReport run_entropy_suite(const EntropySuiteOptions& opts);

}  // namespace wrecon
