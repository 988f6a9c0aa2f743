#pragma once

#include "radwarp/radar_sim.hpp"

#include <utility>
#include <vector>

namespace radwarp {

/// Per-pixel resampling plan from the alias-extended RD grid into the camera
/// raster. Weights are convex (non-negative, sum 1) for every valid pixel.
struct WarpGrid {
    int cam_w = 0, cam_h = 0;
    int n_range = 0, n_doppler = 0, n_ext = 0;
    double range_res = 0.0, doppler_res = 0.0;
    double ext_v0 = 0.0;  // velocity of extended column 0

    GridD range_coord;  // m
    GridD vel_coord;    // m/s, on the extended axis
    GridD sin_az;       // sin(azimuth) for the beam dimension
    GridB valid;        // in radar FoV and inside the extended grid

    // Bilinear support: 4 extended-grid bins and weights per pixel
    // (index -1 for invalid pixels).
    std::vector<std::int32_t> idx;
    std::vector<double> w;
    // Transpose: per extended bin, (pixel, weight) pairs in pixel order.
    std::vector<std::vector<std::pair<std::int32_t, double>>> transpose;

    int pixel_count() const { return cam_w * cam_h; }
};

/// Plan the warp from dense depth and total scene flow (camera frame, m/s).
/// Pixels outside the radar FoV, or whose (range, v_r) leaves the extended
/// grid, are flagged invalid (coordinates clamp, nothing is sampled).
WarpGrid build_warp_grid(const GridD& depth, const GridB& valid, const GridD& sf_x,
                         const GridD& sf_y, const GridD& sf_z, const Calibration& calib,
                         const RadarParams& params, int alias_copies = 3);

struct WarpField {
    GridD value;
    GridB valid;
};

/// Bilinear gather: out(p) = sum_i w_i * values(bin_i). `values` may be the
/// extended grid (n_ext columns) or the canonical grid (n_doppler columns);
/// canonical input is read periodically, which equals tiling it.
WarpField warp_forward(const GridD& values, const WarpGrid& wg);

/// Exact adjoint of warp_forward. `out_cols` selects the gradient width:
/// n_ext, or n_doppler to fold the alias copies back onto the canonical grid.
GridD warp_backward(const GridD& cotangent, const WarpGrid& wg, int out_cols);

/// Trilinear gather over a beamforming stack (one canonical plane per beam);
/// the third coordinate is the pixel's sin(azimuth) on the given axis.
WarpField warp_trilinear(const std::vector<GridD>& beams, const Eigen::VectorXd& sin_axis,
                         const WarpGrid& wg);

/// Nearest-bin inverse map: for each canonical RD bin, the valid camera
/// pixels whose rounded (range, folded Doppler) coordinate lands there.
std::vector<std::vector<std::int32_t>> warped_index_sets(const WarpGrid& wg);

}  // namespace radwarp
