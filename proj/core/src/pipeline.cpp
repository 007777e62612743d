#include "wrecon/pipeline.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "wrecon/errors.hpp"

namespace wrecon {

void BuoyancyParams::validate() const {
    if (!(g > 0)) throw ConfigError("buoyancy: g must be positive");
    if (!(alpha_T > 0)) throw ConfigError("buoyancy: alpha_T must be positive");
    if (!(beta_S > 0)) throw ConfigError("buoyancy: beta_S must be positive");
}

std::vector<double> buoyancy(std::span<const double> sst, std::span<const double> sss, const BuoyancyParams& p) {
    p.validate();
    if (sst.size() != sss.size())
        throw DataError("buoyancy: SST has " + std::to_string(sst.size()) + " values, SSS has " +
                        std::to_string(sss.size()));
    std::vector<double> b(sst.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (!std::isfinite(sst[i]) || !std::isfinite(sss[i])) throw DataError("buoyancy: non-finite input");
        b[i] = p.g * (p.alpha_T * (sst[i] - p.T0) - p.beta_S * (sss[i] - p.S0));
    }
    return b;
}

std::vector<double> lowpass_weights(const FilterParams& p, int available) {
    if (p.window < 1) throw ConfigError("lowpass: window length L must be >= 1, got " + std::to_string(p.window));
    const int n = std::min(p.window, std::max(available, 0));
    std::vector<double> w(static_cast<std::size_t>(n));
    const double L = p.window;
    double sum = 0;
    for (int lag = 0; lag < n; ++lag) {
        w[static_cast<std::size_t>(lag)] = (1.0 / L) * std::exp(-lag / L);
        sum += w[static_cast<std::size_t>(lag)];
    }
    if (p.normalize_weights)
        for (auto& v : w) v /= sum;
    return w;
}

std::vector<std::vector<double>> lowpass_w(const std::vector<std::vector<double>>& series, const FilterParams& p) {
    if (p.window < 1) throw ConfigError("lowpass: window length L must be >= 1, got " + std::to_string(p.window));
    if (series.empty()) throw DataError("lowpass: empty series");
    const std::size_t n = series.front().size();
    for (const auto& s : series)
        if (s.size() != n) throw DataError("lowpass: grids differ in size");
    std::vector<std::vector<double>> out(series.size(), std::vector<double>(n, 0.0));
    if (p.normalize_weights) {
        // Written as x(t) plus weighted departures so constant series come out exactly.
        for (std::size_t t = 0; t < series.size(); ++t) {
            const auto w = lowpass_weights(p, static_cast<int>(t) + 1);
            const auto& cur = series[t];
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0;
                for (std::size_t lag = 1; lag < w.size(); ++lag) acc += w[lag] * (series[t - lag][i] - cur[i]);
                out[t][i] = cur[i] + acc;
            }
        }
        return out;
    }
    for (std::size_t t = 0; t < series.size(); ++t) {
        const auto w = lowpass_weights(p, static_cast<int>(t) + 1);
        for (std::size_t lag = 0; lag < w.size(); ++lag) {
            const auto& src = series[t - lag];
            for (std::size_t i = 0; i < n; ++i) out[t][i] += w[lag] * src[i];
        }
    }
    return out;
}

void SynthConfig::validate() const {
    if (height < 16 || width < 16)
        throw ConfigError("synthetic grid must be at least 16x16, got " + std::to_string(height) + "x" +
                          std::to_string(width));
    if (steps < 1) throw ConfigError("synthetic generator needs at least one time step");
    if (modes < 1 || max_wavenumber < 1) throw ConfigError("synthetic generator needs at least one spectral mode");
    if (eddies < 0 || !(eddy_radius > 0)) throw ConfigError("invalid eddy configuration");
    if (!(ssh_scale > 0) || !(velocity_scale > 0) || !(temperature_scale > 0) || !(salinity_scale > 0) ||
        !(w_scale > 0))
        throw ConfigError("synthetic field scales must be positive");
    if (std::abs(ssh_temperature_correlation) > 1) throw ConfigError("ssh_temperature_correlation must lie in [-1, 1]");
    if (!(mean_sst_amplitude >= 0)) throw ConfigError("mean_sst_amplitude must be non-negative");
    if (noise_amplitude < 0) throw ConfigError("noise_amplitude must be non-negative");
    if (filter.window < 1) throw ConfigError("filter window must be >= 1");
    buoyancy.validate();
    static const std::set<std::string> known{"SSH", "U", "V", "SST", "SSS", "B"};
    if (variables.empty()) throw ConfigError("synthetic generator needs at least one output variable");
    for (const auto& v : variables)
        if (!known.contains(v)) throw ConfigError("synthetic generator cannot produce variable '" + v + "'");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Mode {
    int kx = 0, ky = 0;
    double amplitude = 0, phase = 0, omega = 0;
};

/// Unit-variance sum of random Fourier modes with a power-law spectrum.
class SpectralField {
public:
    SpectralField(std::mt19937_64& rng, int count, int kmax, double slope, double max_drift) {
        std::uniform_int_distribution<int> kx(-kmax, kmax), ky(0, kmax);
        std::uniform_real_distribution<double> phase(0, kTwoPi), drift(-max_drift, max_drift);
        double power = 0;
        while (static_cast<int>(modes_.size()) < count) {
            Mode m;
            m.kx = kx(rng);
            m.ky = ky(rng);
            if (m.kx == 0 && m.ky == 0) continue;
            if (m.ky == 0 && m.kx < 0) continue;
            const double k = std::hypot(m.kx, m.ky);
            m.amplitude = std::pow(k, -slope / 2);
            m.phase = phase(rng);
            m.omega = drift(rng);
            power += 0.5 * m.amplitude * m.amplitude;
            modes_.push_back(m);
        }
        const double norm = 1.0 / std::sqrt(power);
        for (auto& m : modes_) m.amplitude *= norm;
    }

    void evaluate(int h, int w, double t, std::vector<double>& out) const {
        out.assign(static_cast<std::size_t>(h) * w, 0.0);
        std::vector<double> cx(static_cast<std::size_t>(w)), sx(static_cast<std::size_t>(w));
        for (const auto& m : modes_) {
            for (int j = 0; j < w; ++j) {
                const double a = kTwoPi * m.kx * j / w;
                cx[static_cast<std::size_t>(j)] = std::cos(a);
                sx[static_cast<std::size_t>(j)] = std::sin(a);
            }
            for (int i = 0; i < h; ++i) {
                const double b = kTwoPi * m.ky * i / h + m.phase - m.omega * t;
                const double cb = m.amplitude * std::cos(b), sb = m.amplitude * std::sin(b);
                double* row = out.data() + static_cast<std::size_t>(i) * w;
                for (int j = 0; j < w; ++j)
                    row[j] += cx[static_cast<std::size_t>(j)] * cb - sx[static_cast<std::size_t>(j)] * sb;
            }
        }
    }

private:
    std::vector<Mode> modes_;
};

struct Eddy {
    double y0, x0, vy, vx, sign;
};

std::vector<Eddy> make_eddies(std::mt19937_64& rng, const SynthConfig& cfg) {
    std::uniform_real_distribution<double> uy(0, cfg.height), ux(0, cfg.width), ang(0, kTwoPi);
    std::vector<Eddy> out;
    for (int e = 0; e < cfg.eddies; ++e) {
        const double a = ang(rng);
        out.push_back({uy(rng), ux(rng), cfg.eddy_speed * std::sin(a), cfg.eddy_speed * std::cos(a),
                       (e % 2 == 0) ? 1.0 : -1.0});
    }
    return out;
}

void add_eddies(const std::vector<Eddy>& eddies, const SynthConfig& cfg, double t, std::vector<double>& field) {
    const int h = cfg.height, w = cfg.width;
    const double inv = 1.0 / (2 * cfg.eddy_radius * cfg.eddy_radius);
    std::vector<double> gy(static_cast<std::size_t>(h)), gx(static_cast<std::size_t>(w));
    for (const auto& e : eddies) {
        const double cy = std::fmod(std::fmod(e.y0 + e.vy * t, h) + h, h);
        const double cx = std::fmod(std::fmod(e.x0 + e.vx * t, w) + w, w);
        for (int i = 0; i < h; ++i) {
            double d = std::abs(i - cy);
            d = std::min(d, h - d);
            gy[static_cast<std::size_t>(i)] = std::exp(-d * d * inv);
        }
        for (int j = 0; j < w; ++j) {
            double d = std::abs(j - cx);
            d = std::min(d, w - d);
            gx[static_cast<std::size_t>(j)] = std::exp(-d * d * inv);
        }
        const double amp = e.sign * cfg.eddy_amplitude;
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j)
                field[static_cast<std::size_t>(i) * w + j] += amp * gy[static_cast<std::size_t>(i)] * gx[static_cast<std::size_t>(j)];
    }
}

std::size_t at(int i, int j, int h, int w) {
    i = (i % h + h) % h;
    j = (j % w + w) % w;
    return static_cast<std::size_t>(i) * w + j;
}

std::vector<double> ddx(const std::vector<double>& f, int h, int w) {
    std::vector<double> out(f.size());
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) out[at(i, j, h, w)] = 0.5 * (f[at(i, j + 1, h, w)] - f[at(i, j - 1, h, w)]);
    return out;
}

std::vector<double> ddy(const std::vector<double>& f, int h, int w) {
    std::vector<double> out(f.size());
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) out[at(i, j, h, w)] = 0.5 * (f[at(i + 1, j, h, w)] - f[at(i - 1, j, h, w)]);
    return out;
}

std::vector<double> laplacian(const std::vector<double>& f, int h, int w) {
    std::vector<double> out(f.size());
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            out[at(i, j, h, w)] = f[at(i, j + 1, h, w)] + f[at(i, j - 1, h, w)] + f[at(i + 1, j, h, w)] +
                                  f[at(i - 1, j, h, w)] - 4 * f[at(i, j, h, w)];
    return out;
}

/// Base fields shared by every time step, all derived from the master seed.
struct Generator {
    explicit Generator(const SynthConfig& c)
        : cfg(c),
          rng(c.seed),
          kmax(std::max(1, std::min(c.max_wavenumber, std::min(c.height, c.width) / 4))),
          eta(rng, c.modes, kmax, c.spectral_slope, c.max_drift),
          chi(rng, c.modes, kmax, c.spectral_slope, c.max_drift),
          theta(rng, c.modes, kmax, c.spectral_slope, c.max_drift),
          salt(rng, c.modes, kmax, c.spectral_slope, c.max_drift),
          eddies(make_eddies(rng, c)),
          front(rng, c.modes, kmax, c.mean_sst_slope, 0.0) {
        front.evaluate(c.height, c.width, 0.0, front_grid);
    }

    SurfaceFields surface(int t) const {
        const int h = cfg.height, w = cfg.width;
        const std::size_t n = static_cast<std::size_t>(h) * w;
        std::vector<double> hf, cf, tf, sf;
        eta.evaluate(h, w, t, hf);
        add_eddies(eddies, cfg, t, hf);
        chi.evaluate(h, w, t, cf);
        theta.evaluate(h, w, t, tf);
        salt.evaluate(h, w, t, sf);

        SurfaceFields out;
        auto& ssh = out["SSH"];
        ssh.resize(n);
        for (std::size_t i = 0; i < n; ++i) ssh[i] = cfg.ssh_scale * hf[i];

        const auto hx = ddx(hf, h, w), hy = ddy(hf, h, w);
        const auto cx = ddx(cf, h, w), cy = ddy(cf, h, w);
        auto& u = out["U"];
        auto& v = out["V"];
        u.resize(n);
        v.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = cfg.velocity_scale * (-hy[i] + cfg.divergent_ratio * cx[i]);
            v[i] = cfg.velocity_scale * (hx[i] + cfg.divergent_ratio * cy[i]);
        }
        const double rho = cfg.ssh_temperature_correlation;
        const double rest = std::sqrt(1 - rho * rho);
        auto& sst = out["SST"];
        auto& sss = out["SSS"];
        sst.resize(n);
        sss.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            sst[i] = cfg.buoyancy.T0 +
                     cfg.temperature_scale * (rho * hf[i] + rest * tf[i] + cfg.mean_sst_amplitude * front_grid[i]);
            sss[i] = cfg.buoyancy.S0 + cfg.salinity_scale * sf[i];
        }
        out["B"] = buoyancy(sst, sss, cfg.buoyancy);
        return out;
    }

    /// Unit-variance smooth noise field, independent per (seed, t, depth).
    std::vector<double> noise(int t, int depth) const {
        std::seed_seq seq{static_cast<std::uint64_t>(cfg.seed), static_cast<std::uint64_t>(t),
                          static_cast<std::uint64_t>(depth), std::uint64_t{0x6e6f697365}};
        std::mt19937_64 local(seq);
        SpectralField field(local, 16, kmax, 0.0, 0.0);
        std::vector<double> out;
        field.evaluate(cfg.height, cfg.width, 0.0, out);
        return out;
    }

    const SynthConfig& cfg;
    std::mt19937_64 rng;
    int kmax;
    SpectralField eta, chi, theta, salt;
    std::vector<Eddy> eddies;
    SpectralField front;
    std::vector<double> front_grid;
};

}  // namespace

std::vector<double> w_functional(const SurfaceFields& f, int h, int w, int depth, const SynthConfig& cfg) {
    if (depth < 0 || depth >= 3) throw ConfigError("depth index must be 0, 1 or 2");
    const std::size_t n = static_cast<std::size_t>(h) * w;
    for (const char* name : {"SSH", "U", "V", "B"}) {
        auto it = f.find(name);
        if (it == f.end() || it->second.size() != n)
            throw DataError(std::string("w_functional: missing or mis-sized field ") + name);
    }
    std::vector<double> hn(n), bn(n);
    const double b_ref = cfg.buoyancy.g * cfg.buoyancy.alpha_T * cfg.temperature_scale;
    for (std::size_t i = 0; i < n; ++i) {
        hn[i] = f.at("SSH")[i] / cfg.ssh_scale;
        bn[i] = f.at("B")[i] / b_ref;
    }
    const auto lap_h = laplacian(hn, h, w);
    const auto lap_b = laplacian(bn, h, w);
    const auto ux = ddx(f.at("U"), h, w);
    const auto vy = ddy(f.at("V"), h, w);
    const DepthCoupling& c = cfg.coupling[static_cast<std::size_t>(depth)];
    const double scale = cfg.w_scale * cfg.attenuation[static_cast<std::size_t>(depth)] * cfg.gain;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double div = (ux[i] + vy[i]) / cfg.velocity_scale;
        out[i] = scale * (c.ssh_laplacian * lap_h[i] - c.divergence * div + c.buoyancy_laplacian * lap_b[i]);
    }
    return out;
}

SurfaceFields synth_surface(const SynthConfig& cfg, int t) {
    cfg.validate();
    return Generator(cfg).surface(t);
}

SynthOutput generate_synthetic(const SynthConfig& cfg, bool keep_fields) {
    cfg.validate();
    const Generator gen(cfg);
    const int h = cfg.height, w = cfg.width;
    const std::size_t n = static_cast<std::size_t>(h) * w;
    constexpr int kDepths = 3;

    SynthOutput out;
    std::array<std::vector<std::vector<double>>, kDepths> raw;
    for (auto& r : raw) r.reserve(static_cast<std::size_t>(cfg.steps));
    for (int t = 0; t < cfg.steps; ++t) {
        SurfaceFields fields = gen.surface(t);
        FieldSample s;
        s.height = h;
        s.width = w;
        s.channels = kDepths;
        s.time_index = t;
        for (const auto& name : cfg.variables) {
            const auto& src = fields.at(name);
            s.surface[name].assign(src.begin(), src.end());
        }
        for (int d = 0; d < kDepths; ++d) {
            auto wd = w_functional(fields, h, w, d, cfg);
            if (cfg.noise_amplitude > 0) {
                const auto noise = gen.noise(t, d);
                for (std::size_t i = 0; i < n; ++i) wd[i] += cfg.w_scale * cfg.noise_amplitude * noise[i];
            }
            raw[static_cast<std::size_t>(d)].push_back(std::move(wd));
        }
        out.samples.push_back(std::move(s));
        if (keep_fields) out.fields.push_back(std::move(fields));
    }
    if (keep_fields) {
        out.raw_target.assign(static_cast<std::size_t>(cfg.steps), std::vector<double>(n * kDepths));
        for (int t = 0; t < cfg.steps; ++t)
            for (int d = 0; d < kDepths; ++d)
                std::copy(raw[static_cast<std::size_t>(d)][static_cast<std::size_t>(t)].begin(),
                          raw[static_cast<std::size_t>(d)][static_cast<std::size_t>(t)].end(),
                          out.raw_target[static_cast<std::size_t>(t)].begin() + static_cast<std::ptrdiff_t>(d * n));
    }
    for (int d = 0; d < kDepths; ++d) {
        const auto filtered = lowpass_w(raw[static_cast<std::size_t>(d)], cfg.filter);
        for (int t = 0; t < cfg.steps; ++t) {
            auto& target = out.samples[static_cast<std::size_t>(t)].target;
            target.resize(n * kDepths);
            for (std::size_t i = 0; i < n; ++i)
                target[static_cast<std::size_t>(d) * n + i] = static_cast<float>(filtered[static_cast<std::size_t>(t)][i]);
        }
    }
    return out;
}

Splits contiguous_splits(int train, int val, int test) {
    if (train < 1 || val < 0 || test < 0) throw ConfigError("split sizes must be non-negative with train >= 1");
    Splits s;
    int t = 0;
    for (int i = 0; i < train; ++i) s.train.push_back(t++);
    for (int i = 0; i < val; ++i) s.val.push_back(t++);
    for (int i = 0; i < test; ++i) s.test.push_back(t++);
    return s;
}

}  // namespace wrecon
