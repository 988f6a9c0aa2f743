#include "radwarp/warp.hpp"

#include <cmath>
#include <stdexcept>

namespace radwarp {

WarpGrid build_warp_grid(const GridD& depth, const GridB& valid, const GridD& sf_x,
                         const GridD& sf_y, const GridD& sf_z, const Calibration& calib,
                         const RadarParams& params, int alias_copies) {
    if (alias_copies < 1 || alias_copies % 2 == 0)
        throw std::invalid_argument("build_warp_grid: alias_copies must be odd");
    WarpGrid wg;
    wg.cam_w = static_cast<int>(depth.cols());
    wg.cam_h = static_cast<int>(depth.rows());
    wg.n_range = params.n_range();
    wg.n_doppler = params.n_doppler();
    wg.n_ext = wg.n_doppler * alias_copies;
    wg.range_res = params.range_res;
    wg.doppler_res = params.doppler_res;
    const double span = 2.0 * params.max_doppler;
    wg.ext_v0 = -params.max_doppler - (alias_copies / 2) * span;

    wg.range_coord = GridD::Zero(wg.cam_h, wg.cam_w);
    wg.vel_coord = GridD::Zero(wg.cam_h, wg.cam_w);
    wg.sin_az = GridD::Zero(wg.cam_h, wg.cam_w);
    wg.valid = GridB::Zero(wg.cam_h, wg.cam_w);
    const int npix = wg.pixel_count();
    wg.idx.assign(static_cast<size_t>(npix) * 4, -1);
    wg.w.assign(static_cast<size_t>(npix) * 4, 0.0);

    const CameraIntrinsics& k = calib.intrinsics;
    const RigidTransform radar_from_cam = calib.radar_from_cam();

    parallel_for(npix, [&](std::int64_t p) {
        const int u = static_cast<int>(p % wg.cam_w), v = static_cast<int>(p / wg.cam_w);
        if (!valid(v, u) || !(depth(v, u) > 0.0)) return;
        const Vec3 x_c = pixel_to_camera(Vec2(u, v), depth(v, u), k);
        const Vec3 x_r = transform_point(x_c, radar_from_cam);
        if (!in_radar_fov(x_r, calib.fov)) return;
        const Vec3 dir = x_r.normalized();
        const Vec3 xi_radar =
            radar_from_cam.rotation * Vec3(sf_x(v, u), sf_y(v, u), sf_z(v, u));
        const double range = x_r.norm();
        const double v_r = dir.dot(xi_radar);
        wg.range_coord(v, u) = range;
        wg.vel_coord(v, u) = v_r;
        wg.sin_az(v, u) = std::sin(deg2rad(azimuth_deg(x_r)));

        const double fr = range / wg.range_res;
        const double fd = (v_r - wg.ext_v0) / wg.doppler_res;
        if (fr < 0.0 || fr > wg.n_range - 1.0 || fd < 0.0 || fd > wg.n_ext - 1.0) return;
        wg.valid(v, u) = 1;
        const int r0 = std::min(static_cast<int>(fr), wg.n_range - 2);
        const int c0 = std::min(static_cast<int>(fd), wg.n_ext - 2);
        const double tr = fr - r0, tc = fd - c0;
        const std::int32_t base[4] = {
            static_cast<std::int32_t>(r0 * wg.n_ext + c0),
            static_cast<std::int32_t>(r0 * wg.n_ext + c0 + 1),
            static_cast<std::int32_t>((r0 + 1) * wg.n_ext + c0),
            static_cast<std::int32_t>((r0 + 1) * wg.n_ext + c0 + 1)};
        const double weights[4] = {(1 - tr) * (1 - tc), (1 - tr) * tc, tr * (1 - tc),
                                   tr * tc};
        for (int i = 0; i < 4; ++i) {
            wg.idx[4 * p + i] = base[i];
            wg.w[4 * p + i] = weights[i];
        }
    });

    wg.transpose.resize(static_cast<size_t>(wg.n_range) * wg.n_ext);
    for (int p = 0; p < npix; ++p) {
        for (int i = 0; i < 4; ++i) {
            const std::int32_t bin = wg.idx[4 * p + i];
            if (bin >= 0) wg.transpose[bin].emplace_back(p, wg.w[4 * p + i]);
        }
    }
    return wg;
}

namespace {

// Column lookup that treats canonical-width inputs as tiled copies.
inline double fetch(const GridD& values, int bin, int n_ext, int n_doppler) {
    const int r = bin / n_ext, c = bin % n_ext;
    if (values.cols() == n_ext) return values(r, c);
    return values(r, c % n_doppler);
}

}  // namespace

WarpField warp_forward(const GridD& values, const WarpGrid& wg) {
    if (values.rows() != wg.n_range ||
        (values.cols() != wg.n_ext && values.cols() != wg.n_doppler))
        throw std::invalid_argument("warp_forward: value grid dims mismatch");
    WarpField out;
    out.value = GridD::Zero(wg.cam_h, wg.cam_w);
    out.valid = wg.valid;
    parallel_for(wg.pixel_count(), [&](std::int64_t p) {
        const int u = static_cast<int>(p % wg.cam_w), v = static_cast<int>(p / wg.cam_w);
        if (!wg.valid(v, u)) return;
        double acc = 0.0;
        for (int i = 0; i < 4; ++i)
            acc += wg.w[4 * p + i] * fetch(values, wg.idx[4 * p + i], wg.n_ext, wg.n_doppler);
        out.value(v, u) = acc;
    });
    return out;
}

GridD warp_backward(const GridD& cotangent, const WarpGrid& wg, int out_cols) {
    if (cotangent.rows() != wg.cam_h || cotangent.cols() != wg.cam_w)
        throw std::invalid_argument("warp_backward: cotangent dims mismatch");
    if (out_cols != wg.n_ext && out_cols != wg.n_doppler)
        throw std::invalid_argument("warp_backward: bad gradient width");
    GridD grad = GridD::Zero(wg.n_range, out_cols);
    const bool fold = out_cols == wg.n_doppler;
    const int copies = wg.n_ext / wg.n_doppler;
    // Bin-major scatter with fixed pixel order inside each bin, so the sum
    // is reproducible for any thread count.
    parallel_for(static_cast<std::int64_t>(wg.n_range) * out_cols, [&](std::int64_t b) {
        const int r = static_cast<int>(b / out_cols), c = static_cast<int>(b % out_cols);
        double acc = 0.0;
        const int reps = fold ? copies : 1;
        for (int copy = 0; copy < reps; ++copy) {
            const int ext_c = fold ? c + copy * wg.n_doppler : c;
            for (const auto& [pix, weight] : wg.transpose[r * wg.n_ext + ext_c])
                acc += weight * cotangent(pix / wg.cam_w, pix % wg.cam_w);
        }
        grad(r, c) = acc;
    });
    return grad;
}

WarpField warp_trilinear(const std::vector<GridD>& beams, const Eigen::VectorXd& sin_axis,
                         const WarpGrid& wg) {
    const int nb = static_cast<int>(beams.size());
    if (nb < 2) throw std::invalid_argument("warp_trilinear: need >= 2 beams");
    for (const auto& b : beams)
        if (b.rows() != wg.n_range || (b.cols() != wg.n_ext && b.cols() != wg.n_doppler))
            throw std::invalid_argument("warp_trilinear: beam plane dims mismatch");
    const double s0 = sin_axis[0];
    const double ds = sin_axis[1] - sin_axis[0];

    WarpField out;
    out.value = GridD::Zero(wg.cam_h, wg.cam_w);
    out.valid = wg.valid;
    parallel_for(wg.pixel_count(), [&](std::int64_t p) {
        const int u = static_cast<int>(p % wg.cam_w), v = static_cast<int>(p / wg.cam_w);
        if (!wg.valid(v, u)) return;
        const double fb = std::clamp((wg.sin_az(v, u) - s0) / ds, 0.0, nb - 1.0);
        const int b0 = std::min(static_cast<int>(fb), nb - 2);
        const double tb = fb - b0;
        double acc[2] = {0.0, 0.0};
        for (int bb = 0; bb < 2; ++bb)
            for (int i = 0; i < 4; ++i)
                acc[bb] += wg.w[4 * p + i] *
                           fetch(beams[b0 + bb], wg.idx[4 * p + i], wg.n_ext, wg.n_doppler);
        out.value(v, u) = (1.0 - tb) * acc[0] + tb * acc[1];
    });
    return out;
}

std::vector<std::vector<std::int32_t>> warped_index_sets(const WarpGrid& wg) {
    std::vector<std::vector<std::int32_t>> sets(
        static_cast<size_t>(wg.n_range) * wg.n_doppler);
    for (int p = 0; p < wg.pixel_count(); ++p) {
        const int u = p % wg.cam_w, v = p / wg.cam_w;
        if (!wg.valid(v, u)) continue;
        const int r = std::clamp(
            static_cast<int>(std::lround(wg.range_coord(v, u) / wg.range_res)), 0,
            wg.n_range - 1);
        const int je = static_cast<int>(
            std::lround((wg.vel_coord(v, u) - wg.ext_v0) / wg.doppler_res));
        const int c = ((je % wg.n_doppler) + wg.n_doppler) % wg.n_doppler;
        sets[static_cast<size_t>(r) * wg.n_doppler + c].push_back(p);
    }
    return sets;
}

}  // namespace radwarp
