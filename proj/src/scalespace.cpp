#include "radwarp/scalespace.hpp"

#include <cmath>
#include <stdexcept>

namespace radwarp {

GridD tile_doppler(const GridD& g, int copies) {
    if (copies < 1 || copies % 2 == 0)
        throw std::invalid_argument("tile_doppler: copies must be odd and >= 1");
    GridD out(g.rows(), g.cols() * copies);
    for (int c = 0; c < copies; ++c)
        out.block(0, c * g.cols(), g.rows(), g.cols()) = g;
    return out;
}

GridD fold_doppler(const GridD& ext, int copies) {
    if (copies < 1 || ext.cols() % copies != 0)
        throw std::invalid_argument("fold_doppler: width not divisible by copies");
    const auto w = ext.cols() / copies;
    GridD out = GridD::Zero(ext.rows(), w);
    for (int c = 0; c < copies; ++c) out += ext.block(0, c * w, ext.rows(), w);
    return out;
}

double RdScaleSpace::level_lambda(int s) const {
    if (s < 1 || s > levels()) throw std::invalid_argument("level_lambda: bad level");
    return lambda_base / static_cast<double>(1 << (s - 1));
}

namespace {

// Doppler-direction Gaussian blur, truncated at 3 sigma, replicate boundary.
GridD blur_doppler(const GridD& g, double sigma) {
    if (sigma <= 0.0) return g;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    Eigen::VectorXd kernel(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i)
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    kernel /= kernel.sum();
    GridD out(g.rows(), g.cols());
    const int w = static_cast<int>(g.cols());
    parallel_for(g.rows(), [&](std::int64_t r) {
        for (int j = 0; j < w; ++j) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int jj = std::clamp(j + i, 0, w - 1);
                acc += kernel[i + radius] * g(r, jj);
            }
            out(r, j) = acc;
        }
    });
    return out;
}

GridD maxpool2_doppler(const GridD& g) {
    const int w = static_cast<int>(g.cols());
    const int wp = (w + 1) / 2;
    GridD out(g.rows(), wp);
    for (Eigen::Index r = 0; r < g.rows(); ++r)
        for (int j = 0; j < wp; ++j) {
            const int a = 2 * j, b = std::min(2 * j + 1, w - 1);
            out(r, j) = std::max(g(r, a), g(r, b));
        }
    return out;
}

// Bilinear upsample back to full width; pooled cell j sits at source index
// 2j + 0.5, so full-res index i samples pooled position (i - 0.5) / 2.
GridD upsample2_doppler(const GridD& pooled, int full_width) {
    GridD out(pooled.rows(), full_width);
    const int wp = static_cast<int>(pooled.cols());
    for (Eigen::Index r = 0; r < pooled.rows(); ++r)
        for (int i = 0; i < full_width; ++i) {
            const double pos = (i - 0.5) / 2.0;
            const int j0 = std::clamp(static_cast<int>(std::floor(pos)), 0, wp - 1);
            const int j1 = std::min(j0 + 1, wp - 1);
            const double t = std::clamp(pos - j0, 0.0, 1.0);
            out(r, i) = (1.0 - t) * pooled(r, j0) + t * pooled(r, j1);
        }
    return out;
}

GridD central_diff_doppler(const GridD& g, double res) {
    GridD out(g.rows(), g.cols());
    const int w = static_cast<int>(g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
        out(r, 0) = (g(r, 1) - g(r, 0)) / res;
        out(r, w - 1) = (g(r, w - 1) - g(r, w - 2)) / res;
        for (int j = 1; j + 1 < w; ++j) out(r, j) = (g(r, j + 1) - g(r, j - 1)) / (2.0 * res);
    }
    return out;
}

}  // namespace

RdScaleSpace build_scalespace(const RdMap& rd, const ScaleSpaceConfig& cfg) {
    if (cfg.s_levels < 1) throw std::invalid_argument("build_scalespace: S must be >= 1");
    const int n_ext = static_cast<int>(rd.power_db.cols()) * cfg.alias_copies;
    if ((n_ext >> (cfg.s_levels - 1)) < 2)
        throw std::invalid_argument("build_scalespace: too many levels for grid width");

    RdScaleSpace ss;
    ss.range_axis = rd.range_axis;
    ss.range_res = rd.params.range_res;
    ss.doppler_res = rd.params.doppler_res;
    ss.alias_copies = cfg.alias_copies;
    ss.lambda_base = cfg.lambda_base;

    const double span = rd.params.doppler_res * rd.power_db.cols();
    ss.doppler_axis.resize(n_ext);
    const double v0 = rd.doppler_axis[0] - (cfg.alias_copies / 2) * span;
    for (int j = 0; j < n_ext; ++j) ss.doppler_axis[j] = v0 + j * ss.doppler_res;

    ss.power.push_back(tile_doppler(rd.power_db, cfg.alias_copies));
    ss.max_power_db = ss.power[0].maxCoeff();
    for (int s = 2; s <= cfg.s_levels; ++s) {
        const double sigma = cfg.gaussian_sigma * static_cast<double>(1 << (s - 2));
        const GridD blurred = blur_doppler(ss.power.back(), sigma);
        ss.power.push_back(upsample2_doppler(maxpool2_doppler(blurred), n_ext));
    }
    for (const auto& level : ss.power)
        ss.grad.push_back(central_diff_doppler(level, ss.doppler_res));
    return ss;
}

ScaleSample sample_scalespace(const RdScaleSpace& ss, int s, double range_m, double v_mps) {
    if (s < 1 || s > ss.levels()) throw std::invalid_argument("sample_scalespace: bad level");
    const GridD& p = ss.power[s - 1];
    const GridD& g = ss.grad[s - 1];
    const double fr = range_m / ss.range_res;
    const double fd = (v_mps - ss.doppler_axis[0]) / ss.doppler_res;

    ScaleSample out;
    out.in_grid = fr >= 0.0 && fr <= p.rows() - 1.0 && fd >= 0.0 && fd <= p.cols() - 1.0;
    const double cfr = std::clamp(fr, 0.0, static_cast<double>(p.rows() - 1));
    const double cfd = std::clamp(fd, 0.0, static_cast<double>(p.cols() - 1));
    const int r0 = std::min(static_cast<int>(cfr), static_cast<int>(p.rows()) - 2 >= 0
                                                       ? static_cast<int>(p.rows()) - 2
                                                       : 0);
    const int c0 = std::min(static_cast<int>(cfd), static_cast<int>(p.cols()) - 2 >= 0
                                                       ? static_cast<int>(p.cols()) - 2
                                                       : 0);
    const double tr = cfr - r0, tc = cfd - c0;
    const int r1 = std::min(r0 + 1, static_cast<int>(p.rows()) - 1);
    const int c1 = std::min(c0 + 1, static_cast<int>(p.cols()) - 1);
    auto lerp2 = [&](const GridD& grid) {
        return (1 - tr) * ((1 - tc) * grid(r0, c0) + tc * grid(r0, c1)) +
               tr * ((1 - tc) * grid(r1, c0) + tc * grid(r1, c1));
    };
    out.power_db = lerp2(p);
    out.grad_db_per_mps = out.in_grid ? lerp2(g) : 0.0;
    return out;
}

}  // namespace radwarp
