#include "wrecon/grad_check.hpp"

#include <cmath>
#include <random>

#include "wrecon/errors.hpp"

namespace wrecon {

namespace {

double evaluate(ParamStore<double>& params, const LossBuilder& loss) {
    Graph<double> g(&params, false);
    return g.value(loss(g))[0];
}

}  // namespace

GradCheckReport grad_check(ParamStore<double>& params, const LossBuilder& loss, const GradCheckOptions& opts) {
    if (opts.eps < 1e-6 || opts.eps > 1e-4) throw ConfigError("grad_check: eps must lie in [1e-6, 1e-4]");
    GradCheckReport report;
    const std::size_t total = params.total_elements();
    if (total == 0) return report;

    params.zero_grad();
    {
        Graph<double> g(&params, true);
        g.backward(loss(g));
    }

    std::vector<std::pair<int, std::size_t>> entries;
    if (opts.samples == 0 || opts.samples >= total) {
        for (std::size_t p = 0; p < params.size(); ++p)
            for (std::size_t i = 0; i < params.value(static_cast<int>(p)).size(); ++i)
                entries.emplace_back(static_cast<int>(p), i);
    } else {
        std::mt19937_64 rng(opts.seed);
        std::uniform_int_distribution<std::size_t> pick(0, total - 1);
        for (std::size_t s = 0; s < opts.samples; ++s) {
            std::size_t flat = pick(rng);
            int p = 0;
            while (flat >= params.value(p).size()) flat -= params.value(p++).size();
            entries.emplace_back(p, flat);
        }
    }

    for (auto [p, i] : entries) {
        const double analytic = params.grad(p)[i];
        double& slot = params.value(p)[i];
        const double saved = slot;
        slot = saved + opts.eps;
        const double up = evaluate(params, loss);
        slot = saved - opts.eps;
        const double down = evaluate(params, loss);
        slot = saved;
        const double numeric = (up - down) / (2 * opts.eps);

        GradCheckEntry e{params.name(p), i, analytic, numeric, 0};
        ++report.checked;
        if (!std::isfinite(analytic) || !std::isfinite(numeric)) {
            report.passed = false;
            report.failure = "non-finite gradient in " + e.param + "[" + std::to_string(i) + "]";
            report.worst = e;
            return report;
        }
        e.rel_error = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
        if (report.checked == 1 || e.rel_error > report.worst.rel_error) report.worst = e;
        if (e.rel_error > opts.tol) report.passed = false;
    }
    return report;
}

}  // namespace wrecon
