#pragma once

#include "radwarp/scene.hpp"

#include <limits>
#include <vector>

namespace radwarp {

/// Chirp-sequence radar grid parameters. Grid sizes derive from the
/// resolution cells: n_range = max_range/range_res, n_doppler spans the
/// unambiguous interval [-max_doppler, +max_doppler).
struct RadarParams {
    double range_res = 0.25;     // m
    double doppler_res = 0.25;   // m/s
    double max_range = 25.0;     // m
    double max_doppler = 10.0;   // m/s, half of the unambiguous span
    int n_rx = 3;
    double element_spacing = 0.5;  // in carrier wavelengths
    double carrier_hz = 77e9;
    double noise_power = 1.0;  // linear per-bin variance after windowed FFT
    double gain = 1.0;         // folded radar-equation constant

    int n_range() const { return static_cast<int>(std::lround(max_range / range_res)); }
    int n_doppler() const {
        return static_cast<int>(std::lround(2.0 * max_doppler / doppler_res));
    }
    double range_at(int bin) const { return bin * range_res; }
    double doppler_at(int bin) const { return (bin - n_doppler() / 2) * doppler_res; }
};

/// One point reflector as the radar sees it: position in the radar frame at
/// time k and the radial velocity implied by the frame-to-frame displacement.
struct RadarObs {
    Vec3 x_radar = Vec3::Zero();
    double v_radial = 0.0;  // m/s, positive receding
    double rcs = 1.0;
    int instance_id = -1;
};

/// Radar-frame observations of all scene objects inside the radar FoV.
/// Radial velocity folds in ego motion, so it is exactly consistent with the
/// rendered ground-truth scene flow. Objects outside the FoV are dropped.
std::vector<RadarObs> radar_observations(const Scene& scene, const Calibration& calib);

/// Wall returns from the backdrop plane, sampled on a fixed azimuth grid at
/// the radar's mount height. Empty unless the backdrop is enabled with a
/// positive rcs; samples beyond max_range are dropped here so the
/// synthesizer never has to skip them. instance_id is -1 (static clutter).
std::vector<RadarObs> backdrop_observations(const Scene& scene, const Calibration& calib,
                                            const RadarParams& params,
                                            double az_step_deg = 1.0);

struct RdSpectrum {
    std::vector<GridC> u;          // n_rx channels, rows = range, cols = doppler
    Eigen::VectorXd range_axis;    // m
    Eigen::VectorXd doppler_axis;  // m/s
    RadarParams params;
};

struct RdMap {
    GridD power_db;
    Eigen::VectorXd range_axis;
    Eigen::VectorXd doppler_axis;
    double noise_floor_db = std::numeric_limits<double>::quiet_NaN();
    bool has_floor = false;
    RadarParams params;
};

/// Time-domain chirp-sequence synthesis: per-scatterer complex exponentials
/// plus circular Gaussian noise, periodic Hann window in both dims, unitary
/// 2-D FFT, Doppler axis fftshifted. Velocities beyond the unambiguous span
/// wrap; ranges beyond max_range are skipped with a warning on stderr.
RdSpectrum synth_spectrum(const std::vector<RadarObs>& obs, const RadarParams& params,
                          std::uint64_t seed);

/// Per-scatterer amplitude that yields the given per-antenna peak SNR (dB)
/// at the window's coherent gain, relative to noise_power.
double amplitude_for_snr(double snr_db, const RadarParams& params);

/// Equivalent gain knob for a unit-RCS scatterer at the given range.
double gain_for_snr(double snr_db, double range_m, const RadarParams& params);

/// Non-coherent power map: 10*log10(sum_i |U_i|^2), clamped at -300 dB.
RdMap rd_power(const RdSpectrum& spec);

struct Beamform3d {
    std::vector<GridD> power;    // one [n_range x n_doppler] plane per beam
    Eigen::VectorXd sin_axis;    // sin(azimuth) per beam, uniform
    Eigen::VectorXd az_deg_axis;  // asin of the clamped sin axis
};

/// Zero-padded FFT beamforming across the antenna dimension; linear power
/// divided by the number of antennas.
Beamform3d beamform_3d(const RdSpectrum& spec, int n_beams);

/// power_db minus the estimated noise floor. Requires rd.has_floor.
GridD snr_map(const RdMap& rd);

}  // namespace radwarp
