#pragma once

#include "radwarp/radar_sim.hpp"

#include <vector>

namespace radwarp {

/// Cell-averaging CFAR with a 2-D rectangular training ring. Window sizes
/// are half-widths in bins; edge bins use the truncated window.
struct CfarConfig {
    int guard_range = 2, guard_doppler = 2;
    int train_range = 6, train_doppler = 6;
    double threshold_db = 13.0;
};

GridB cfar_detect(const RdMap& rd, const CfarConfig& cfg = {});

/// Nearest-rank percentile (default 99.5) of power over non-detected bins.
double noise_floor(const RdMap& rd, const GridB& detections, double percentile = 99.5);

struct DoaEstimate {
    double azimuth_deg = 0.0;
    bool clipped = false;  // |sin| argument left [-1, 1] and was clamped
};

/// Phase monopulse on the 3-channel ULA: the two adjacent-channel phase
/// differences are averaged as phasors before the arcsine inversion.
DoaEstimate doa_monopulse(const RdSpectrum& spec, int range_bin, int doppler_bin);

Eigen::VectorXd default_bartlett_grid(double step_deg = 0.5);

/// Bartlett beamforming: argmax over the candidate grid of |a(phi)^H u|^2
/// with parabolic refinement between grid points.
double doa_bartlett(const RdSpectrum& spec, int range_bin, int doppler_bin,
                    const Eigen::VectorXd& grid_deg);

/// Two-component SNR histogram model: Gaussian noise (dB domain) plus a
/// Swerling-3 Chi-squared signal (linear domain, 4 DoF, scale = mean power).
struct SnrMixture {
    double noise_mean_db = 0.0;
    double noise_std_db = 1.0;
    double signal_scale = 1.0;   // linear
    double weight_noise = 0.5;   // mixing weight of the noise component
    double crossover_db = 0.0;   // noise-likelihood < 0.1% above this
    int iterations = 0;
};

/// EM-style alternation with robust (median/MAD) initialization.
/// Requires at least 1000 samples.
SnrMixture fit_snr_mixture(const std::vector<double>& snr_db);

/// Analytic crossover of a Gaussian noise component: the SNR whose upper-tail
/// noise likelihood is 0.1%.
double mixture_crossover_db(double noise_mean_db, double noise_std_db);

/// Swerling-3 linear power draw (Gamma k=2, theta=scale/2), keyed.
double swerling3_sample(std::uint64_t key, double scale);

/// Differentiable stationarity score in (0, 1]: exp(-mu^2/(sigma*Qinv(a/2))^2).
/// High values mean "consistent with the stationary hypothesis".
double mti_probability(double mu_e, double sigma_e, double alpha);

enum class MtiLabel { Stationary, Moving };

/// Reference rule: moving iff the foreground flow magnitude exceeds 0.5 m/s.
MtiLabel mti_reference(const Vec3& xi_fg);

/// Per-pixel virtual-reflector gate: |aspect cosine| >= 0.5 between the radar
/// ray and the local surface normal. Pixels without a normal get false.
GridB virtual_reflector_labels(const GridD& depth, const GridB& valid,
                               const Calibration& calib);

}  // namespace radwarp
