#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wrecon/datastore.hpp"

namespace wrecon {

/// Linearized equation of state constants.
struct BuoyancyParams {
    double g = 9.81;         // m/s^2
    double alpha_T = 2e-4;   // 1/K
    double beta_S = 7.6e-4;  // 1/psu
    double T0 = 288.15;      // K
    double S0 = 35.0;        // psu

    void validate() const;
};

/// b = g * (alpha_T * (SST - T0) - beta_S * (SSS - S0)), elementwise.
std::vector<double> buoyancy(std::span<const double> sst, std::span<const double> sss, const BuoyancyParams& p);

struct FilterParams {
    int window = 8;  // L, in samples
    bool normalize_weights = false;
};

/// Weights applied to w(t - lag) for lag = 0 .. n-1 where n = min(L, t + 1):
/// (1/L) exp(-lag / L), rescaled to sum to one when normalize_weights is set.
std::vector<double> lowpass_weights(const FilterParams& p, int available);

/// Causal exponential low-pass along time. `series[t]` is one grid; the
/// startup window is truncated to the available history.
std::vector<std::vector<double>> lowpass_w(const std::vector<std::vector<double>>& series, const FilterParams& p);

/// Per-depth mixing of the three surface-derived terms of the raw target.
struct DepthCoupling {
    double ssh_laplacian = 1.0;
    double divergence = 1.0;
    double buoyancy_laplacian = 1.0;
};

/// Synthetic coupled ocean fields. All base fields are periodic on the grid.
///
/// With F_eta, F_chi, F_theta, F_salt unit-variance spectral fields (random
/// Fourier modes, amplitude ~ |k|^(-slope/2), slowly drifting phases) and E a
/// set of advected Gaussian eddies, at every time step:
///
///   h    = F_eta + E                                    (dimensionless SSH)
///   SSH  = ssh_scale * h
///   U    = velocity_scale * (-Dy h + divergent_ratio * Dx F_chi)
///   V    = velocity_scale * ( Dx h + divergent_ratio * Dy F_chi)
///   SST  = T0 + temperature_scale * (rho * h + sqrt(1 - rho^2) * F_theta + mean_sst_amplitude * G)
///   SSS  = S0 + salinity_scale * F_salt
///   B    = buoyancy(SST, SSS)
///
/// where G is a time-invariant unit-variance spectral field (spectrum slope
/// mean_sst_slope) standing in for a geographically fixed front,
/// Dx f = (f[i, j+1] - f[i, j-1]) / 2, Dy likewise along rows, and
/// Lap f = f[i, j+1] + f[i, j-1] + f[i+1, j] + f[i-1, j] - 4 f[i, j]
/// (all periodic). The noise-free raw vertical velocity at depth d is
///
///   w_d = w_scale * attenuation_d * gain * (
///           c_ssh_d * Lap(SSH / ssh_scale)
///         - c_div_d * (Dx U + Dy V) / velocity_scale
///         + c_b_d   * Lap(B / b_ref) ),     b_ref = g * alpha_T * temperature_scale
///
/// and the raw target adds w_scale * noise_amplitude * N_d(t), with N_d a
/// unit-variance smooth field drawn independently at each time step. The stored
/// target is lowpass_w of the raw series.
struct SynthConfig {
    int height = 64;
    int width = 64;
    int steps = 704;
    std::uint64_t seed = 7;
    std::vector<std::string> variables = VariableUniverse::standard_names();

    int modes = 48;
    int max_wavenumber = 6;
    double spectral_slope = 3.0;
    double max_drift = 0.1;  // radians per step
    int eddies = 6;
    double eddy_radius = 4.0;
    double eddy_speed = 0.5;  // grid cells per step
    double eddy_amplitude = 1.5;

    double ssh_scale = 0.1;
    double velocity_scale = 0.5;
    double divergent_ratio = 1.0;
    double temperature_scale = 1.0;
    double salinity_scale = 0.2;
    double ssh_temperature_correlation = 0.6;
    double mean_sst_amplitude = 1.0;
    double mean_sst_slope = 1.0;
    BuoyancyParams buoyancy;

    double w_scale = 1e-4;
    double gain = 8.0;
    double noise_amplitude = 0.3;
    std::array<double, 3> attenuation{1.0, 0.6, 0.35};
    std::array<DepthCoupling, 3> coupling{DepthCoupling{1.0, 0.8, 0.6}, DepthCoupling{0.9, 1.0, 0.5},
                                          DepthCoupling{0.8, 0.7, 0.7}};
    FilterParams filter;

    void validate() const;
};

/// Surface fields of one time step at full precision, keyed by name
/// (SSH, U, V, SST, SSS, B).
using SurfaceFields = std::map<std::string, std::vector<double>>;

struct SynthOutput {
    std::vector<FieldSample> samples;
    /// Filled only when requested: double-precision surface fields and the
    /// unfiltered raw target [C*H*W] per time step.
    std::vector<SurfaceFields> fields;
    std::vector<std::vector<double>> raw_target;
};

/// Noise-free raw target at one depth evaluated from surface fields.
std::vector<double> w_functional(const SurfaceFields& fields, int height, int width, int depth, const SynthConfig& cfg);

SynthOutput generate_synthetic(const SynthConfig& cfg, bool keep_fields = false);

/// Surface fields of one time step (no target). Useful for pixel-level sampling.
SurfaceFields synth_surface(const SynthConfig& cfg, int t);

/// Contiguous train/val/test split in time order.
Splits contiguous_splits(int train, int val, int test);

/// Version tag written into dataset provenance.
inline constexpr const char* kGeneratorVersion = "synthetic-coupled-fields/1";

}  // namespace wrecon
