#include "wrecon/infolab.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "wrecon/errors.hpp"
#include "wrecon/pipeline.hpp"

namespace wrecon {

using nlohmann::json;

void DiscreteJoint::validate() const {
    if (cards.empty()) throw DataError("joint table needs at least the target variable");
    std::size_t n = 1;
    for (int c : cards) {
        if (c < 1) throw DataError("joint table cardinalities must be positive");
        n *= static_cast<std::size_t>(c);
    }
    if (p.size() != n)
        throw DataError("joint table has " + std::to_string(p.size()) + " entries, cardinalities imply " +
                        std::to_string(n));
    double s = 0;
    for (double v : p) {
        if (!(v >= 0) || !std::isfinite(v)) throw DataError("joint table entries must be finite and non-negative");
        s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) throw DataError("joint table sums to " + std::to_string(s) + ", not 1");
}

namespace {

void check_given(const std::vector<int>& given, int n) {
    for (std::size_t i = 0; i < given.size(); ++i) {
        if (given[i] < 1 || given[i] >= n)
            throw DataError("conditioning variable " + std::to_string(given[i]) + " is not one of the observed variables");
        for (std::size_t j = 0; j < i; ++j)
            if (given[j] == given[i]) throw DataError("conditioning set lists a variable twice");
    }
}

bool strict_subset(std::vector<int> a, std::vector<int> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a.size() < b.size() && std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

double cond_entropy(const DiscreteJoint& joint, const std::vector<int>& given) {
    joint.validate();
    const int n = joint.num_vars();
    check_given(given, n);

    // Strides of every variable in the flat table, and of the conditioning key.
    std::vector<std::size_t> stride(static_cast<std::size_t>(n));
    std::size_t s = 1;
    for (int v = n - 1; v >= 0; --v) {
        stride[static_cast<std::size_t>(v)] = s;
        s *= static_cast<std::size_t>(joint.cards[static_cast<std::size_t>(v)]);
    }
    std::size_t keys = 1;
    for (int v : given) keys *= static_cast<std::size_t>(joint.cards[static_cast<std::size_t>(v)]);
    const int qw = joint.cards[0];
    std::vector<double> p_wx(keys * static_cast<std::size_t>(qw), 0.0), p_x(keys, 0.0);

    for (std::size_t i = 0; i < joint.p.size(); ++i) {
        std::size_t key = 0;
        for (int v : given) {
            const std::size_t c = static_cast<std::size_t>(joint.cards[static_cast<std::size_t>(v)]);
            key = key * c + (i / stride[static_cast<std::size_t>(v)]) % c;
        }
        const std::size_t w = i / stride[0];
        p_wx[key * static_cast<std::size_t>(qw) + w] += joint.p[i];
        p_x[key] += joint.p[i];
    }
    double h = 0;
    for (std::size_t key = 0; key < keys; ++key) {
        if (p_x[key] <= 0) continue;
        for (int w = 0; w < qw; ++w) {
            const double pj = p_wx[key * static_cast<std::size_t>(qw) + static_cast<std::size_t>(w)];
            if (pj > 0) h -= pj * std::log(pj / p_x[key]);
        }
    }
    return std::max(h, 0.0);
}

json MonotonicityReport::to_json() const {
    return {{"chain", chain}, {"entropies", entropies}, {"gaps", gaps}, {"monotone", monotone}, {"min_gap", min_gap}};
}

MonotonicityReport verify_monotonicity(const DiscreteJoint& joint, const std::vector<std::vector<int>>& chain,
                                       double tolerance) {
    if (chain.size() < 2) throw DataError("a monotonicity chain needs at least two conditioning sets");
    for (std::size_t i = 1; i < chain.size(); ++i)
        if (!strict_subset(chain[i - 1], chain[i])) throw DataError("conditioning sets are not strictly nested");
    MonotonicityReport r;
    r.chain = chain;
    for (const auto& s : chain) r.entropies.push_back(cond_entropy(joint, s));
    r.min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < chain.size(); ++i) {
        const double gap = r.entropies[i - 1] - r.entropies[i];
        r.gaps.push_back(gap);
        r.min_gap = std::min(r.min_gap, gap);
        if (gap < -tolerance) r.monotone = false;
    }
    return r;
}

void GaussianSystem::validate() const {
    const int n = num_vars();
    if (n < 1) throw DataError("Gaussian system needs at least the target variable");
    if (cov.size() != static_cast<std::size_t>(n) * n) throw DataError("covariance must be n x n");
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> c(cov.data(), n, n);
    if (!c.allFinite()) throw DataError("covariance has non-finite entries");
    const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw DataError("covariance is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success) throw DataError("covariance is not positive definite");
}

double gaussian_cond_variance(const GaussianSystem& sys, const std::vector<int>& given) {
    sys.validate();
    const int n = sys.num_vars();
    check_given(given, n);
    const auto at = [&](int i, int j) { return sys.cov[static_cast<std::size_t>(i) * n + j]; };
    const double var_w = at(0, 0);
    if (given.empty()) return var_w;
    const int k = static_cast<int>(given.size());
    Eigen::MatrixXd s(k, k);
    Eigen::VectorXd c(k);
    for (int a = 0; a < k; ++a) {
        c(a) = at(0, given[static_cast<std::size_t>(a)]);
        for (int b = 0; b < k; ++b) s(a, b) = at(given[static_cast<std::size_t>(a)], given[static_cast<std::size_t>(b)]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) throw DataError("conditioning covariance block is singular");
    return var_w - c.dot(llt.solve(c));
}

double gaussian_cond_entropy(const GaussianSystem& sys, const std::vector<int>& given) {
    const double v = gaussian_cond_variance(sys, given);
    if (!(v > 0)) return -std::numeric_limits<double>::infinity();
    return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * v);
}

DiscreteJoint random_joint(const std::vector<int>& cards, std::mt19937_64& rng) {
    DiscreteJoint j;
    j.cards = cards;
    std::size_t n = 1;
    for (int c : cards) n *= static_cast<std::size_t>(c);
    std::exponential_distribution<double> e(1.0);
    j.p.resize(n);
    double s = 0;
    for (auto& v : j.p) s += (v = e(rng));
    for (auto& v : j.p) v /= s;
    return j;
}

DiscreteJoint conditionally_independent_joint(int q, std::mt19937_64& rng) {
    const auto simplex = [&](int k) { return random_joint({k}, rng).p; };
    const auto px1 = simplex(q);
    DiscreteJoint j;
    j.cards = {q, q, q};
    j.p.assign(static_cast<std::size_t>(q) * q * q, 0.0);
    for (int x1 = 0; x1 < q; ++x1) {
        const auto pw = simplex(q);
        const auto px2 = simplex(q);
        for (int w = 0; w < q; ++w)
            for (int x2 = 0; x2 < q; ++x2)
                j.p[(static_cast<std::size_t>(w) * q + x1) * q + x2] =
                    px1[static_cast<std::size_t>(x1)] * pw[static_cast<std::size_t>(w)] * px2[static_cast<std::size_t>(x2)];
    }
    return j;
}

GaussianSystem random_gaussian(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) a(i, k) = z(rng);
    Eigen::MatrixXd c = a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
    c = 0.5 * (c + c.transpose());
    GaussianSystem g;
    g.mean.assign(static_cast<std::size_t>(n), 0.0);
    g.cov.resize(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) g.cov[static_cast<std::size_t>(i) * n + k] = c(i, k);
    return g;
}

DiscreteJoint empirical_joint(const std::vector<std::vector<int>>& columns, const std::vector<int>& cards) {
    if (columns.empty() || columns.size() != cards.size()) throw DataError("empirical joint: one column per variable");
    const std::size_t m = columns[0].size();
    if (m == 0) throw DataError("empirical joint: no samples");
    DiscreteJoint j;
    j.cards = cards;
    std::size_t n = 1;
    for (int c : cards) n *= static_cast<std::size_t>(c);
    std::vector<std::size_t> counts(n, 0);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t key = 0;
        for (std::size_t v = 0; v < columns.size(); ++v) {
            if (columns[v].size() != m) throw DataError("empirical joint: columns differ in length");
            const int b = columns[v][i];
            if (b < 0 || b >= cards[v]) throw DataError("empirical joint: bin index out of range");
            key = key * static_cast<std::size_t>(cards[v]) + static_cast<std::size_t>(b);
        }
        ++counts[key];
    }
    j.p.resize(n);
    for (std::size_t k = 0; k < n; ++k) j.p[k] = static_cast<double>(counts[k]) / static_cast<double>(m);
    return j;
}

std::vector<int> quantile_bins(const std::vector<double>& values, int bins) {
    if (bins < 1) throw ConfigError("number of bins must be >= 1");
    if (values.empty()) return {};
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> edges;
    for (int k = 1; k < bins; ++k) edges.push_back(sorted[sorted.size() * static_cast<std::size_t>(k) / bins]);
    std::vector<int> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), values[i]) - edges.begin());
    return out;
}

json SuiteSection::to_json() const {
    return {{"name", name}, {"trials", trials}, {"passed", passed}, {"min_gap", min_gap}, {"max_abs_gap", max_abs_gap}};
}

bool EntropySuiteReport::passed() const {
    return discrete.passed == discrete.trials && independence.passed == independence.trials &&
           gaussian.passed == gaussian.trials && plugin.passed * 100 >= 95 * plugin.trials;
}

json EntropySuiteReport::to_json() const {
    return {{"discrete", discrete.to_json()},
            {"independence", independence.to_json()},
            {"gaussian", gaussian.to_json()},
            {"plugin", plugin.to_json()},
            {"plugin_chain", plugin_chain},
            {"plugin_mean_information", plugin_mean_information},
            {"passed", passed()}};
}

namespace {

void note_gaps(SuiteSection& s, const std::vector<double>& gaps) {
    for (double g : gaps) {
        s.min_gap = std::min(s.min_gap, g);
        s.max_abs_gap = std::max(s.max_abs_gap, std::abs(g));
    }
}

SuiteSection section(const std::string& name) {
    SuiteSection s;
    s.name = name;
    s.min_gap = std::numeric_limits<double>::infinity();
    return s;
}

}  // namespace

EntropySuiteReport run_entropy_suite(const EntropySuiteOptions& opts) {
    if (opts.trials < 1 || opts.independence_trials < 1) throw ConfigError("entropy suite needs at least one trial");
    if (opts.samples < 1 || opts.grid < 16) throw ConfigError("plug-in trials need samples >= 1 and grid >= 16");
    EntropySuiteReport rep;
    rep.discrete = section("random exact joints");
    rep.independence = section("conditionally independent constructions");
    rep.gaussian = section("Gaussian closed form");
    rep.plugin = section("plug-in estimates on synthetic fields");

    std::mt19937_64 rng(opts.seed);
    const std::vector<std::vector<int>> chain{{}, {1}, {1, 2}, {1, 2, 3}};

    std::uniform_int_distribution<int> card(2, 4);
    for (int t = 0; t < opts.trials; ++t) {
        const auto joint = random_joint({card(rng), card(rng), card(rng), card(rng)}, rng);
        const auto r = verify_monotonicity(joint, chain, opts.tolerance);
        note_gaps(rep.discrete, r.gaps);
        rep.discrete.passed += r.monotone;
        ++rep.discrete.trials;
    }

    for (int t = 0; t < opts.independence_trials; ++t) {
        const auto joint = conditionally_independent_joint(card(rng), rng);
        const auto r = verify_monotonicity(joint, {{1}, {1, 2}}, opts.tolerance);
        note_gaps(rep.independence, r.gaps);
        rep.independence.passed += std::abs(r.gaps[0]) <= opts.tolerance;
        ++rep.independence.trials;
    }

    for (int t = 0; t < opts.trials; ++t) {
        const int n = 5;
        const auto sys = random_gaussian(n, rng);
        std::vector<int> order{1, 2, 3, 4};
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<int> given;
        double prev = gaussian_cond_entropy(sys, given);
        bool ok = true;
        std::vector<double> gaps;
        for (int v : order) {
            given.push_back(v);
            const double h = gaussian_cond_entropy(sys, given);
            gaps.push_back(prev - h);
            if (h > prev + opts.tolerance) ok = false;
            prev = h;
        }
        note_gaps(rep.gaussian, gaps);
        rep.gaussian.passed += ok;
        ++rep.gaussian.trials;
    }

    // Pixels of the synthetic generator: w at the shallowest level against
    // quantized SSH, U, V, B, over the nested scenario chain.
    rep.plugin_chain = {"{}", "{SSH}", "{SSH,U,V}", "{SSH,U,V,B}"};
    const std::vector<std::string> vars{"SSH", "U", "V", "B"};
    double info = 0;
    for (int t = 0; t < opts.trials; ++t) {
        SynthConfig cfg;
        cfg.height = cfg.width = opts.grid;
        cfg.max_wavenumber = std::min(cfg.max_wavenumber, opts.grid / 4);
        cfg.eddy_radius = std::max(1.5, cfg.eddy_radius * opts.grid / 64.0);
        const int plane = opts.grid * opts.grid;
        cfg.steps = (opts.samples + plane - 1) / plane;
        cfg.seed = opts.seed * 1000003ULL + static_cast<std::uint64_t>(t) + 1;
        const SynthOutput out = generate_synthetic(cfg);

        std::vector<std::vector<double>> cols(5);
        for (auto& c : cols) c.reserve(static_cast<std::size_t>(opts.samples));
        for (const auto& s : out.samples) {
            for (int p = 0; p < plane && static_cast<int>(cols[0].size()) < opts.samples; ++p) {
                cols[0].push_back(s.target[static_cast<std::size_t>(p)]);
                for (std::size_t v = 0; v < vars.size(); ++v)
                    cols[v + 1].push_back(s.surface.at(vars[v])[static_cast<std::size_t>(p)]);
            }
        }
        std::vector<std::vector<int>> binned;
        for (const auto& c : cols) binned.push_back(quantile_bins(c, opts.bins));
        const auto joint = empirical_joint(binned, std::vector<int>(5, opts.bins));
        const auto r = verify_monotonicity(joint, {{}, {1}, {1, 2, 3}, {1, 2, 3, 4}}, opts.tolerance);
        note_gaps(rep.plugin, r.gaps);
        rep.plugin.passed += r.monotone;
        ++rep.plugin.trials;
        info += r.entropies.front() - r.entropies.back();
    }
    rep.plugin_mean_information = info / opts.trials;
    return rep;
}

}  // namespace wrecon
