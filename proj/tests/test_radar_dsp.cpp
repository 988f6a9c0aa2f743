#include "radwarp/radar_dsp.hpp"

#include <doctest.h>

#include <algorithm>
#include <stdexcept>
#include <vector>

using namespace radwarp;

namespace {

RdMap map_from(const GridD& power_db) {
    RdMap rd;
    rd.power_db = power_db;
    rd.params.range_res = 0.25;
    rd.params.doppler_res = 0.25;
    rd.params.max_range = 0.25 * power_db.rows();
    rd.params.max_doppler = 0.25 * power_db.cols() / 2.0;
    return rd;
}

// Direct per-bin ring mean, no summed-area tricks.
GridB cfar_bruteforce(const RdMap& rd, const CfarConfig& cfg) {
    const int rows = static_cast<int>(rd.power_db.rows());
    const int cols = static_cast<int>(rd.power_db.cols());
    GridB det = GridB::Zero(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            double sum = 0.0;
            long n = 0;
            for (int rr = r - cfg.guard_range - cfg.train_range;
                 rr <= r + cfg.guard_range + cfg.train_range; ++rr)
                for (int cc = c - cfg.guard_doppler - cfg.train_doppler;
                     cc <= c + cfg.guard_doppler + cfg.train_doppler; ++cc) {
                    if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
                    if (std::abs(rr - r) <= cfg.guard_range &&
                        std::abs(cc - c) <= cfg.guard_doppler)
                        continue;
                    sum += std::pow(10.0, rd.power_db(rr, cc) / 10.0);
                    ++n;
                }
            if (n <= 0) continue;
            const double mean_db = 10.0 * std::log10(sum / n);
            if (rd.power_db(r, c) > mean_db + cfg.threshold_db) det(r, c) = 1;
        }
    return det;
}

RdSpectrum spectrum_at(double az_deg, double snr_db, std::uint64_t seed,
                       bool noisy) {
    RadarParams p;
    const double az = deg2rad(az_deg);
    RadarObs o;
    o.x_radar = 10.0 * Vec3(std::cos(az), std::sin(az), 0.0);
    o.v_radial = 2.0;
    o.rcs = 1.0;
    p.gain = gain_for_snr(snr_db, 10.0, p);
    if (!noisy) {
        RadarParams q = p;
        q.noise_power = 0.0;
        return synth_spectrum({o}, q, seed);
    }
    return synth_spectrum({o}, p, seed);
}

void peak_bin(const RdSpectrum& spec, int& r, int& c) {
    Eigen::Index rr, cc;
    rd_power(spec).power_db.maxCoeff(&rr, &cc);
    r = static_cast<int>(rr);
    c = static_cast<int>(cc);
}

}  // namespace

TEST_CASE("cfar matches a brute-force ring mean, including edges") {
    GridD power = GridD::Zero(40, 48);
    for (int i = 0; i < power.size(); ++i)
        power.data()[i] = 3.0 * (uniform01(i) - 0.5);
    // Plant peaks in the interior, at a corner region, and near an edge.
    power(20, 24) = 30.0;
    power(1, 2) = 30.0;
    power(38, 24) = 30.0;
    const RdMap rd = map_from(power);
    CfarConfig cfg;
    cfg.guard_range = 1;
    cfg.guard_doppler = 1;
    cfg.train_range = 3;
    cfg.train_doppler = 3;
    cfg.threshold_db = 12.0;

    const GridB fast = cfar_detect(rd, cfg);
    const GridB slow = cfar_bruteforce(rd, cfg);
    CHECK(fast == slow);
    CHECK(fast(20, 24) == 1);
    CHECK(fast(1, 2) == 1);
    CHECK(fast(38, 24) == 1);
    CHECK(fast.cast<int>().sum() < 12);  // the floor stays quiet

    CHECK_THROWS_AS(cfar_detect(rd, CfarConfig{.guard_range = 0,
                                               .guard_doppler = 0,
                                               .train_range = 0,
                                               .train_doppler = 1}),
                    std::invalid_argument);
    const RdMap tiny = map_from(GridD::Zero(4, 4));
    CHECK_THROWS_AS(cfar_detect(tiny, CfarConfig{}), std::invalid_argument);
}

TEST_CASE("noise floor is the nearest-rank percentile over quiet bins") {
    // Values 1..200 in scrambled order; the 99.5th percentile nearest-rank
    // statistic of 200 samples is the ceil(0.995*200) = 199th order value.
    GridD power(10, 20);
    std::vector<double> vals(200);
    for (int i = 0; i < 200; ++i) vals[i] = i + 1.0;
    for (int i = 0; i < 200; ++i)
        std::swap(vals[i], vals[mix64(i) % 200]);
    for (int i = 0; i < 200; ++i) power.data()[i] = vals[i];

    const RdMap rd = map_from(power);
    const GridB none = GridB::Zero(10, 20);
    CHECK(noise_floor(rd, none, 99.5) == doctest::Approx(199.0));
    CHECK(noise_floor(rd, none, 50.0) == doctest::Approx(100.0));
    CHECK(noise_floor(rd, none, 100.0) == doctest::Approx(200.0));

    // Masking the largest value as a detection changes the extreme ranks.
    GridB mask = none;
    for (int i = 0; i < 200; ++i)
        if (power.data()[i] == 200.0) mask.data()[i] = 1;
    CHECK(noise_floor(rd, mask, 100.0) == doctest::Approx(199.0));

    const GridB all = GridB::Constant(10, 20, 1);
    CHECK_THROWS_AS(noise_floor(rd, all, 99.5), std::runtime_error);
}

TEST_CASE("monopulse inverts the array phase exactly on clean data") {
    for (double az : {-60.0, -30.0, 0.0, 15.0, 45.0}) {
        const RdSpectrum spec = spectrum_at(az, 20.0, 1, false);
        int r, c;
        peak_bin(spec, r, c);
        const DoaEstimate est = doa_monopulse(spec, r, c);
        CHECK_FALSE(est.clipped);
        CHECK(est.azimuth_deg == doctest::Approx(az).epsilon(1e-4));
    }
    RdSpectrum two;
    two.u = {GridC::Zero(2, 2), GridC::Zero(2, 2)};
    CHECK_THROWS_AS(doa_monopulse(two, 0, 0), std::invalid_argument);
}

TEST_CASE("bartlett beam scan refines to sub-step accuracy") {
    const Eigen::VectorXd grid = default_bartlett_grid(0.5);
    CHECK(grid.size() == 361);
    CHECK(grid[0] == doctest::Approx(-90.0));
    CHECK(grid[360] == doctest::Approx(90.0));

    for (double az : {-60.0, -17.3, 0.0, 33.7, 60.0}) {
        const RdSpectrum spec = spectrum_at(az, 20.0, 1, false);
        int r, c;
        peak_bin(spec, r, c);
        CHECK(doa_bartlett(spec, r, c, grid) == doctest::Approx(az).epsilon(0.03));
    }
}

TEST_CASE("doa estimators stay accurate at moderate SNR") {
    // 50 noisy draws at 15 dB: the monopulse MAE stays below 3 degrees.
    // Read the known target bin (range 10 m, v = 2 m/s) so the test probes
    // the estimator, not the detector.
    double mono_err = 0.0, bart_err = 0.0;
    const double az = 20.0;
    const Eigen::VectorXd grid = default_bartlett_grid(0.5);
    const int n = 50, r = 40, c = 48;
    for (int i = 0; i < n; ++i) {
        const RdSpectrum spec = spectrum_at(az, 15.0, 1000 + i, true);
        mono_err += std::abs(doa_monopulse(spec, r, c).azimuth_deg - az);
        bart_err += std::abs(doa_bartlett(spec, r, c, grid) - az);
    }
    CHECK(mono_err / n < 3.0);
    CHECK(bart_err / n < 3.0);
}

TEST_CASE("swerling draws have the configured mean and gamma shape") {
    const double scale = 4.0;
    const int n = 60000;
    double sum = 0.0, sq = 0.0, lo = 1e300;
    for (int i = 0; i < n; ++i) {
        const double x = swerling3_sample(i, scale);
        lo = std::min(lo, x);
        sum += x;
        sq += x * x;
    }
    CHECK(lo >= 0.0);
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    // Gamma(k=2, theta=scale/2): mean = scale, variance = scale^2 / 2.
    CHECK(mean == doctest::Approx(scale).epsilon(0.02));
    CHECK(var == doctest::Approx(scale * scale / 2.0).epsilon(0.04));
}

TEST_CASE("mixture fit recovers synthetic noise and signal components") {
    std::vector<double> samples;
    const double mu = 1.5, sigma = 2.0, scale = std::pow(10.0, 22.0 / 10.0);
    for (int i = 0; i < 17000; ++i)
        samples.push_back(mu + sigma * gauss_pair(i)[0]);
    for (int i = 0; i < 3000; ++i)
        samples.push_back(10.0 * std::log10(swerling3_sample(900000 + i, scale)));

    const SnrMixture m = fit_snr_mixture(samples);
    CHECK(m.noise_mean_db == doctest::Approx(mu).epsilon(0.05));
    CHECK(m.noise_std_db == doctest::Approx(sigma).epsilon(0.05));
    CHECK(m.signal_scale == doctest::Approx(scale).epsilon(0.10));
    CHECK(m.weight_noise == doctest::Approx(0.85).epsilon(0.03));
    // Crossover: the 0.1% upper tail of the fitted noise Gaussian.
    CHECK(m.crossover_db ==
          doctest::Approx(m.noise_mean_db + 3.090232306167814 * m.noise_std_db)
              .epsilon(1e-9));
    CHECK(m.iterations >= 1);

    CHECK_THROWS_AS(fit_snr_mixture(std::vector<double>(10, 0.0)), std::invalid_argument);
}

TEST_CASE("mixture_crossover_db matches the probit tail") {
    CHECK(mixture_crossover_db(0.0, 1.0) == doctest::Approx(3.090232306167814).epsilon(1e-9));
    CHECK(mixture_crossover_db(2.0, 3.0) ==
          doctest::Approx(2.0 + 3.0 * 3.090232306167814).epsilon(1e-9));
}

TEST_CASE("mti probability is a calibrated stationarity score") {
    const double sigma = 0.25, alpha = 0.05;
    CHECK(mti_probability(0.0, sigma, alpha) == doctest::Approx(1.0));
    // At mu = sigma * Qinv(alpha/2) the score drops to exactly 1/e.
    const double q = inverse_q(alpha / 2.0);
    CHECK(mti_probability(sigma * q, sigma, alpha) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    // Symmetric in the sign of the innovation.
    CHECK(mti_probability(-0.3, sigma, alpha) ==
          doctest::Approx(mti_probability(0.3, sigma, alpha)).epsilon(1e-14));
    // Monotone decreasing in |mu|.
    CHECK(mti_probability(0.5, sigma, alpha) < mti_probability(0.2, sigma, alpha));
    CHECK_THROWS_AS(mti_probability(0.1, 0.0, alpha), std::invalid_argument);
    CHECK_THROWS_AS(mti_probability(0.1, sigma, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(mti_probability(0.1, sigma, 1.0), std::invalid_argument);
}

TEST_CASE("mti reference thresholds the foreground flow norm at 0.5") {
    CHECK(mti_reference(Vec3(0.0, 0.0, 0.49)) == MtiLabel::Stationary);
    CHECK(mti_reference(Vec3(0.0, 0.0, 0.51)) == MtiLabel::Moving);
    CHECK(mti_reference(Vec3(0.3, 0.3, 0.3)) == MtiLabel::Moving);  // norm 0.52
    CHECK(mti_reference(Vec3::Zero()) == MtiLabel::Stationary);
}

TEST_CASE("virtual reflector gate keeps surfaces facing the radar ray") {
    const Calibration calib = Calibration::default_rig();
    const int w = calib.intrinsics.width, h = calib.intrinsics.height;
    // Fronto-parallel wall: normals point straight back at the sensor, so
    // the aspect cosine magnitude is ~1 near the image center.
    GridD depth = GridD::Constant(h, w, 20.0);
    GridB valid = GridB::Constant(h, w, 1);
    const GridB labels = virtual_reflector_labels(depth, valid, calib);
    CHECK(labels(240, 320) == 1);
    // Border pixels lack a full neighborhood and are excluded.
    CHECK(labels(0, 0) == 0);
    CHECK(labels.cast<int>().sum() > (w - 2) * (h - 2) / 2);

    // A steeply raking plane z = 5 + 2.2 x (camera frame) has normal
    // (2.2, 0, -1): the aspect cosine magnitude stays below 0.5 for rays
    // near and right of the image center, so the gate rejects the patch.
    GridD slant = GridD::Zero(h, w);
    GridB slant_valid = GridB::Zero(h, w);
    for (int v = 0; v < h; ++v)
        for (int u = 250; u <= 500; ++u) {
            slant(v, u) = 5.0 / (1.0 - 2.2 * (u - 320.0) / 500.0);
            slant_valid(v, u) = 1;
        }
    const GridB slant_labels = virtual_reflector_labels(slant, slant_valid, calib);
    int hits = 0;
    for (int v = 100; v < 380; ++v)
        for (int u = 321; u < 420; ++u) hits += slant_labels(v, u);
    CHECK(hits == 0);
}

TEST_CASE("clipped monopulse flags out-of-range sine arguments") {
    // At quarter-wavelength spacing a 0.8 pi phase step asks for
    // sin(az) = 1.6, which must clamp to the +90 deg edge.
    RdSpectrum spec;
    spec.params.element_spacing = 0.25;
    GridC a(1, 1), b(1, 1), c(1, 1);
    a(0, 0) = std::polar(1.0, 0.0);
    b(0, 0) = std::polar(1.0, 0.8 * kPi);
    c(0, 0) = std::polar(1.0, 1.6 * kPi);
    spec.u = {a, b, c};
    const DoaEstimate est = doa_monopulse(spec, 0, 0);
    CHECK(est.clipped);
    CHECK(est.azimuth_deg == doctest::Approx(90.0));
}
