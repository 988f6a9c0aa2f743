#include "radwarp/radar_dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace radwarp {

GridB cfar_detect(const RdMap& rd, const CfarConfig& cfg) {
    if (cfg.train_range <= 0 || cfg.train_doppler <= 0)
        throw std::invalid_argument("cfar_detect: training window must be positive");
    const int rows = static_cast<int>(rd.power_db.rows());
    const int cols = static_cast<int>(rd.power_db.cols());
    const int outer_r = cfg.guard_range + cfg.train_range;
    const int outer_c = cfg.guard_doppler + cfg.train_doppler;
    if (2 * outer_r + 1 > rows || 2 * outer_c + 1 > cols)
        throw std::invalid_argument("cfar_detect: grid smaller than CFAR window");

    // Summed-area table over linear power makes the ring mean O(1) per bin.
    GridD lin(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) lin(r, c) = std::pow(10.0, rd.power_db(r, c) / 10.0);
    GridD sat = GridD::Zero(rows + 1, cols + 1);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            sat(r + 1, c + 1) = lin(r, c) + sat(r, c + 1) + sat(r + 1, c) - sat(r, c);
    auto box = [&](int r0, int c0, int r1, int c1) {  // inclusive, clamped
        r0 = std::max(r0, 0);
        c0 = std::max(c0, 0);
        r1 = std::min(r1, rows - 1);
        c1 = std::min(c1, cols - 1);
        const double s = sat(r1 + 1, c1 + 1) - sat(r0, c1 + 1) - sat(r1 + 1, c0) + sat(r0, c0);
        const long n = static_cast<long>(r1 - r0 + 1) * (c1 - c0 + 1);
        return std::pair<double, long>(s, n);
    };

    GridB det = GridB::Zero(rows, cols);
    parallel_for(static_cast<std::int64_t>(rows) * cols, [&](std::int64_t i) {
        const int r = static_cast<int>(i / cols), c = static_cast<int>(i % cols);
        const auto [outer_sum, outer_n] = box(r - outer_r, c - outer_c, r + outer_r, c + outer_c);
        const auto [inner_sum, inner_n] =
            box(r - cfg.guard_range, c - cfg.guard_doppler, r + cfg.guard_range,
                c + cfg.guard_doppler);
        const double train_sum = outer_sum - inner_sum;
        const long train_n = outer_n - inner_n;
        if (train_n <= 0) return;
        const double mean_db = 10.0 * std::log10(std::max(train_sum / train_n, 1e-300));
        if (rd.power_db(r, c) > mean_db + cfg.threshold_db) det(r, c) = 1;
    });
    return det;
}

double noise_floor(const RdMap& rd, const GridB& detections, double percentile) {
    std::vector<double> vals;
    vals.reserve(rd.power_db.size());
    for (Eigen::Index r = 0; r < rd.power_db.rows(); ++r)
        for (Eigen::Index c = 0; c < rd.power_db.cols(); ++c)
            if (!detections(r, c)) vals.push_back(rd.power_db(r, c));
    if (vals.empty()) throw std::runtime_error("noise_floor: every bin is a detection");
    std::sort(vals.begin(), vals.end());
    const size_t rank = static_cast<size_t>(
        std::ceil(percentile / 100.0 * static_cast<double>(vals.size())));
    return vals[std::clamp<size_t>(rank, 1, vals.size()) - 1];
}

DoaEstimate doa_monopulse(const RdSpectrum& spec, int range_bin, int doppler_bin) {
    if (spec.u.size() < 3) throw std::invalid_argument("doa_monopulse: needs 3 channels");
    const std::complex<double> u1 = spec.u[0](range_bin, doppler_bin);
    const std::complex<double> u2 = spec.u[1](range_bin, doppler_bin);
    const std::complex<double> u3 = spec.u[2](range_bin, doppler_bin);
    const std::complex<double> mean_rot = u2 * std::conj(u1) + u3 * std::conj(u2);
    const double dpsi = std::arg(mean_rot);
    const double s = dpsi / (2.0 * kPi * spec.params.element_spacing);
    DoaEstimate est;
    est.clipped = std::abs(s) > 1.0;
    est.azimuth_deg = rad2deg(std::asin(std::clamp(s, -1.0, 1.0)));
    return est;
}

Eigen::VectorXd default_bartlett_grid(double step_deg) {
    const int n = static_cast<int>(std::floor(180.0 / step_deg)) + 1;
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) g[i] = -90.0 + i * step_deg;
    return g;
}

double doa_bartlett(const RdSpectrum& spec, int range_bin, int doppler_bin,
                    const Eigen::VectorXd& grid_deg) {
    const int n_rx = static_cast<int>(spec.u.size());
    Eigen::VectorXcd u(n_rx);
    for (int i = 0; i < n_rx; ++i) u[i] = spec.u[i](range_bin, doppler_bin);
    const double d = spec.params.element_spacing;
    Eigen::VectorXd pw(grid_deg.size());
    for (Eigen::Index g = 0; g < grid_deg.size(); ++g) {
        std::complex<double> acc = 0.0;
        const double s = std::sin(deg2rad(grid_deg[g]));
        for (int i = 0; i < n_rx; ++i) acc += u[i] * std::polar(1.0, -2.0 * kPi * d * i * s);
        pw[g] = std::norm(acc);
    }
    Eigen::Index best;
    pw.maxCoeff(&best);
    if (best == 0 || best == pw.size() - 1) return grid_deg[best];
    const double y1 = pw[best - 1], y2 = pw[best], y3 = pw[best + 1];
    const double denom = y1 - 2.0 * y2 + y3;
    const double delta = std::abs(denom) > 1e-300 ? 0.5 * (y1 - y3) / denom : 0.0;
    const double step = grid_deg[best] - grid_deg[best - 1];
    return grid_deg[best] + std::clamp(delta, -0.5, 0.5) * step;
}

namespace {

double sw3_pdf_db(double y_db, double scale) {
    // y = 10 log10 x with x ~ Gamma(2, scale/2); includes the Jacobian.
    const double x = std::pow(10.0, y_db / 10.0);
    const double px = 4.0 * x / (scale * scale) * std::exp(-2.0 * x / scale);
    return px * x * std::log(10.0) / 10.0;
}

double gauss_pdf(double y, double mu, double sigma) {
    const double z = (y - mu) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * kPi));
}

double median_of(std::vector<double> v) {
    const size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + n / 2, v.end());
    return v[n / 2];
}

}  // namespace

double mixture_crossover_db(double noise_mean_db, double noise_std_db) {
    return noise_mean_db + inverse_q(0.001) * noise_std_db;
}

SnrMixture fit_snr_mixture(const std::vector<double>& snr_db) {
    if (snr_db.size() < 1000)
        throw std::invalid_argument("fit_snr_mixture: needs >= 1000 samples");

    const double med = median_of(snr_db);
    std::vector<double> absdev(snr_db.size());
    for (size_t i = 0; i < snr_db.size(); ++i) absdev[i] = std::abs(snr_db[i] - med);
    const double mad = median_of(absdev);

    SnrMixture m;
    m.noise_mean_db = med;
    m.noise_std_db = std::max(1.4826 * mad, 1e-3);
    double hi_sum = 0.0;
    long hi_n = 0;
    for (double y : snr_db)
        if (y > med + 3.0 * m.noise_std_db) {
            hi_sum += std::pow(10.0, y / 10.0);
            ++hi_n;
        }
    m.signal_scale = hi_n > 0 ? hi_sum / hi_n : std::pow(10.0, (med + 10.0) / 10.0);
    m.weight_noise = 1.0 - static_cast<double>(hi_n) / static_cast<double>(snr_db.size());

    double prev_ll = -1e300;
    std::vector<double> resp(snr_db.size());
    for (int it = 0; it < 300; ++it) {
        double ll = 0.0;
        for (size_t i = 0; i < snr_db.size(); ++i) {
            const double pn = m.weight_noise * gauss_pdf(snr_db[i], m.noise_mean_db, m.noise_std_db);
            const double ps = (1.0 - m.weight_noise) * sw3_pdf_db(snr_db[i], m.signal_scale);
            const double tot = pn + ps;
            resp[i] = tot > 1e-300 ? pn / tot : 1.0;
            ll += std::log(std::max(tot, 1e-300));
        }
        double rw = 0.0, mu = 0.0;
        for (size_t i = 0; i < snr_db.size(); ++i) {
            rw += resp[i];
            mu += resp[i] * snr_db[i];
        }
        if (rw < 1e-9 || rw > snr_db.size() - 1e-9)
            throw std::runtime_error("fit_snr_mixture: degenerate mixture");
        mu /= rw;
        double var = 0.0, sig_w = 0.0, sig_x = 0.0;
        for (size_t i = 0; i < snr_db.size(); ++i) {
            var += resp[i] * (snr_db[i] - mu) * (snr_db[i] - mu);
            sig_w += 1.0 - resp[i];
            sig_x += (1.0 - resp[i]) * std::pow(10.0, snr_db[i] / 10.0);
        }
        m.noise_mean_db = mu;
        m.noise_std_db = std::max(std::sqrt(var / rw), 1e-3);
        m.signal_scale = sig_x / sig_w;  // Chi-squared(4) scale MLE is the weighted mean
        m.weight_noise = rw / static_cast<double>(snr_db.size());
        m.iterations = it + 1;
        if (std::abs(ll - prev_ll) < 1e-9 * std::abs(ll)) break;
        prev_ll = ll;
    }
    m.crossover_db = mixture_crossover_db(m.noise_mean_db, m.noise_std_db);
    return m;
}

double swerling3_sample(std::uint64_t key, double scale) {
    const double u1 = 1.0 - uniform01(key);
    const double u2 = 1.0 - uniform01(mix64(key ^ 0xa5a5a5a5a5a5a5a5ull));
    return -(scale / 2.0) * (std::log(u1) + std::log(u2));
}

double mti_probability(double mu_e, double sigma_e, double alpha) {
    if (sigma_e <= 0.0) throw std::invalid_argument("mti_probability: sigma must be > 0");
    if (alpha <= 0.0 || alpha >= 1.0)
        throw std::invalid_argument("mti_probability: alpha must be in (0,1)");
    const double q = inverse_q(alpha / 2.0);
    const double z = mu_e / (sigma_e * q);
    return std::exp(-z * z);
}

MtiLabel mti_reference(const Vec3& xi_fg) {
    return xi_fg.norm() > 0.5 ? MtiLabel::Moving : MtiLabel::Stationary;
}

GridB virtual_reflector_labels(const GridD& depth, const GridB& valid,
                               const Calibration& calib) {
    const CameraIntrinsics& k = calib.intrinsics;
    const RigidTransform radar_from_cam = calib.radar_from_cam();
    GridB out = GridB::Zero(depth.rows(), depth.cols());
    parallel_for(depth.size(), [&](std::int64_t i) {
        const int u = static_cast<int>(i % depth.cols());
        const int v = static_cast<int>(i / depth.cols());
        if (!valid(v, u) || !(depth(v, u) > 0.0)) return;
        const auto n_c = surface_normal(depth, valid, u, v, k);
        if (!n_c) return;
        const Vec3 x_r =
            transform_point(pixel_to_camera(Vec2(u, v), depth(v, u), k), radar_from_cam);
        const Vec3 n_r = radar_from_cam.rotation * (*n_c);
        if (x_r.norm() < 1e-9) return;
        if (std::abs(aspect_cosine(x_r, n_r)) >= 0.5) out(v, u) = 1;
    });
    return out;
}

}  // namespace radwarp
