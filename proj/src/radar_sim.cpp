#include "radwarp/radar_sim.hpp"

#include "radwarp/scene_sim.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <cstdio>
#include <stdexcept>

namespace radwarp {

std::vector<RadarObs> radar_observations(const Scene& scene, const Calibration& calib) {
    std::vector<RadarObs> obs;
    const RigidTransform ego_bg = ego_background_transform(scene.ego);
    for (const auto& o : scene.objects) {
        RadarObs r;
        r.x_radar = transform_point(o.position, calib.radar_from_ego);
        if (!in_radar_fov(r.x_radar, calib.fov)) continue;
        const Vec3 x_e1 = transform_point(o.position + scene.ego.dt * o.velocity, ego_bg);
        const Vec3 x_r1 = transform_point(x_e1, calib.radar_from_ego);
        r.v_radial = r.x_radar.normalized().dot(x_r1 - r.x_radar) / scene.ego.dt;
        r.rcs = o.rcs;
        r.instance_id = o.instance_id;
        obs.push_back(r);
    }
    return obs;
}

std::vector<RadarObs> backdrop_observations(const Scene& scene, const Calibration& calib,
                                            const RadarParams& params, double az_step_deg) {
    std::vector<RadarObs> obs;
    if (!scene.backdrop.enabled || !(scene.backdrop.rcs > 0.0)) return obs;
    if (!(az_step_deg > 0.0)) throw std::invalid_argument("backdrop_observations: az_step_deg must be positive");
    const RigidTransform ego_bg = ego_background_transform(scene.ego);
    const Vec3 mount = transform_point(Vec3::Zero(), inverse(calib.radar_from_ego));
    const double d = scene.backdrop.distance;
    const double half = calib.fov.azimuth_halfwidth_deg;
    for (double az = -half; az <= half + 1e-9; az += az_step_deg) {
        // Point on the wall plane x = d, at the radar's height, hit by the ray
        // leaving the radar at azimuth az.
        const Vec3 pos_e(d, mount.y() + (d - mount.x()) * std::tan(deg2rad(az)), mount.z());
        RadarObs r;
        r.x_radar = transform_point(pos_e, calib.radar_from_ego);
        const double range = r.x_radar.norm();
        if (range < params.range_res || range > params.max_range - params.range_res) continue;
        if (!in_radar_fov(r.x_radar, calib.fov)) continue;
        const Vec3 x_r1 = transform_point(transform_point(pos_e, ego_bg), calib.radar_from_ego);
        r.v_radial = r.x_radar.normalized().dot(x_r1 - r.x_radar) / scene.ego.dt;
        r.rcs = scene.backdrop.rcs;
        r.instance_id = -1;
        obs.push_back(r);
    }
    return obs;
}

namespace {

Eigen::VectorXd hann_periodic(int n) {
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / n));
    return w;
}

// Unitary 2-D FFT of a row-major complex grid (rows then columns), in place.
void fft2d_unitary(GridC& g) {
    Eigen::FFT<double> fft;
    const int rows = static_cast<int>(g.rows()), cols = static_cast<int>(g.cols());
    std::vector<std::complex<double>> in(cols), out(cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) in[c] = g(r, c);
        fft.fwd(out, in);
        for (int c = 0; c < cols; ++c) g(r, c) = out[c];
    }
    in.resize(rows);
    out.resize(rows);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) in[r] = g(r, c);
        fft.fwd(out, in);
        for (int r = 0; r < rows; ++r) g(r, c) = out[r];
    }
    g *= 1.0 / std::sqrt(static_cast<double>(rows) * cols);
}

GridC fftshift_cols(const GridC& g) {
    GridC out(g.rows(), g.cols());
    const int m = static_cast<int>(g.cols());
    for (int j = 0; j < m; ++j) out.col(j) = g.col((j + m / 2) % m);
    return out;
}

constexpr std::uint64_t kNoiseStream = 0x52ull;
constexpr std::uint64_t kPhaseStream = 0x53ull;

}  // namespace

RdSpectrum synth_spectrum(const std::vector<RadarObs>& obs, const RadarParams& params,
                          std::uint64_t seed) {
    const int n = params.n_range();   // fast-time samples = range bins
    const int m = params.n_doppler();  // chirps = doppler bins
    if (n < 2 || m < 2) throw std::invalid_argument("synth_spectrum: degenerate grid");

    struct Tone {
        double amp, u_r, u_d, phase0, sin_az;
    };
    std::vector<Tone> tones;
    for (size_t t = 0; t < obs.size(); ++t) {
        const double range = obs[t].x_radar.norm();
        if (range > params.max_range) {
            std::fprintf(stderr, "synth_spectrum: scatterer at %.2f m beyond max range, skipped\n",
                         range);
            continue;
        }
        if (range < 1e-6) continue;
        Tone tone;
        tone.amp = params.gain * std::sqrt(obs[t].rcs) / (range * range);
        tone.u_r = range / (params.range_res * n);
        tone.u_d = obs[t].v_radial / (params.doppler_res * m);
        tone.phase0 = 2.0 * kPi * uniform01(seed ^ (kPhaseStream << 56) ^ t);
        tone.sin_az = std::sin(deg2rad(azimuth_deg(obs[t].x_radar)));
        tones.push_back(tone);
    }

    const Eigen::VectorXd wn = hann_periodic(n), wm = hann_periodic(m);
    const double sum_w2 = wn.squaredNorm() * wm.squaredNorm();
    const double sigma_t =
        params.noise_power > 0.0
            ? std::sqrt(params.noise_power * static_cast<double>(n) * m / sum_w2)
            : 0.0;

    RdSpectrum spec;
    spec.params = params;
    spec.range_axis.resize(n);
    for (int i = 0; i < n; ++i) spec.range_axis[i] = params.range_at(i);
    spec.doppler_axis.resize(m);
    for (int j = 0; j < m; ++j) spec.doppler_axis[j] = params.doppler_at(j);

    spec.u.resize(params.n_rx);
    for (int ant = 0; ant < params.n_rx; ++ant) {
        GridC time(n, m);
        // Per-tone separable factors: row[n] * col[m], evaluated directly per
        // index so no rounding drift accumulates.
        std::vector<std::vector<std::complex<double>>> col_f(tones.size());
        for (size_t t = 0; t < tones.size(); ++t) {
            col_f[t].resize(m);
            for (int j = 0; j < m; ++j)
                col_f[t][j] = std::polar(1.0, 2.0 * kPi * tones[t].u_d * j);
        }
        parallel_for(n, [&](std::int64_t row) {
            for (int j = 0; j < m; ++j) time(row, j) = {0.0, 0.0};
            for (size_t t = 0; t < tones.size(); ++t) {
                const double psi = 2.0 * kPi * params.element_spacing * ant * tones[t].sin_az;
                const std::complex<double> rowf = std::polar(
                    tones[t].amp, 2.0 * kPi * tones[t].u_r * row + tones[t].phase0 + psi);
                for (int j = 0; j < m; ++j) time(row, j) += rowf * col_f[t][j];
            }
            if (sigma_t > 0.0) {
                const double s = sigma_t / std::sqrt(2.0);
                for (int j = 0; j < m; ++j) {
                    const std::uint64_t key = seed ^ (kNoiseStream << 56) ^
                                              (static_cast<std::uint64_t>(ant) * n * m +
                                               static_cast<std::uint64_t>(row) * m + j);
                    const Eigen::Vector2d z = gauss_pair(key);
                    time(row, j) += std::complex<double>(s * z[0], s * z[1]);
                }
            }
            for (int j = 0; j < m; ++j) time(row, j) *= wn[row] * wm[j];
        });
        fft2d_unitary(time);
        spec.u[ant] = fftshift_cols(time);
    }
    return spec;
}

double amplitude_for_snr(double snr_db, const RadarParams& params) {
    // Peak |U| of a windowed on-bin tone is amp*sqrt(N*M)/4 (Hann coherent
    // gain 1/2 per dim under the unitary FFT).
    const double n = params.n_range(), m = params.n_doppler();
    return 4.0 * std::sqrt(params.noise_power * std::pow(10.0, snr_db / 10.0) / (n * m));
}

double gain_for_snr(double snr_db, double range_m, const RadarParams& params) {
    return amplitude_for_snr(snr_db, params) * range_m * range_m;
}

RdMap rd_power(const RdSpectrum& spec) {
    if (spec.u.empty()) throw std::invalid_argument("rd_power: empty spectrum");
    RdMap rd;
    rd.params = spec.params;
    rd.range_axis = spec.range_axis;
    rd.doppler_axis = spec.doppler_axis;
    GridD lin = GridD::Zero(spec.u[0].rows(), spec.u[0].cols());
    for (const auto& ch : spec.u) lin += ch.cwiseAbs2();
    rd.power_db = lin.unaryExpr(
        [](double p) { return p > 1e-30 ? 10.0 * std::log10(p) : -300.0; });
    return rd;
}

Beamform3d beamform_3d(const RdSpectrum& spec, int n_beams) {
    const int n_rx = static_cast<int>(spec.u.size());
    if (n_beams < n_rx) throw std::invalid_argument("beamform_3d: n_beams < n_rx");
    const int rows = static_cast<int>(spec.u[0].rows());
    const int cols = static_cast<int>(spec.u[0].cols());

    // B-point DFT of the 3 antenna samples = [B x n_rx] matrix times channel
    // stack; cheaper and simpler than per-bin FFT calls.
    Eigen::MatrixXcd dft(n_beams, n_rx);
    for (int b = 0; b < n_beams; ++b)
        for (int i = 0; i < n_rx; ++i)
            dft(b, i) = std::polar(1.0, -2.0 * kPi * b * i / n_beams);

    Beamform3d out;
    out.sin_axis.resize(n_beams);
    out.az_deg_axis.resize(n_beams);
    for (int b = 0; b < n_beams; ++b) {
        const double f = (b - n_beams / 2) / static_cast<double>(n_beams);
        const double s = f / spec.params.element_spacing;
        out.sin_axis[b] = s;
        out.az_deg_axis[b] = rad2deg(std::asin(std::clamp(s, -1.0, 1.0)));
    }
    out.power.assign(n_beams, GridD::Zero(rows, cols));
    parallel_for(rows, [&](std::int64_t r) {
        Eigen::VectorXcd c(n_rx);
        for (int j = 0; j < cols; ++j) {
            for (int i = 0; i < n_rx; ++i) c[i] = spec.u[i](r, j);
            const Eigen::VectorXcd beams = dft * c;
            for (int b = 0; b < n_beams; ++b) {
                // fftshift: beam index b corresponds to DFT row (b + B/2) % B.
                const int src = (b + n_beams / 2) % n_beams;
                out.power[b](r, j) = std::norm(beams[src]) / n_rx;
            }
        }
    });
    return out;
}

GridD snr_map(const RdMap& rd) {
    if (!rd.has_floor || !std::isfinite(rd.noise_floor_db))
        throw std::invalid_argument("snr_map: noise floor not set");
    return rd.power_db.array() - rd.noise_floor_db;
}

}  // namespace radwarp
