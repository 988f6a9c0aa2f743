#pragma once

#include "radwarp/radar_sim.hpp"

namespace radwarp {

/// Tile a grid along the column (Doppler) axis, `copies` identical blocks.
GridD tile_doppler(const GridD& g, int copies);

/// Adjoint of tile_doppler: sum the blocks back onto the canonical width.
GridD fold_doppler(const GridD& ext, int copies);

struct ScaleSample {
    double power_db = 0.0;
    double grad_db_per_mps = 0.0;  // d power / d v_r
    bool in_grid = false;
};

/// Doppler scale-space pyramid over an alias-extended RD map. Level 1 is the
/// tiled map; level s+1 = bilinear-upsample(maxpool2(gauss(level s))), blur
/// and pooling along Doppler only. Per-level weights halve.
struct RdScaleSpace {
    std::vector<GridD> power;  // n_range x n_ext per level
    std::vector<GridD> grad;   // central-difference Doppler gradient per level
    Eigen::VectorXd range_axis;
    Eigen::VectorXd doppler_axis;  // extended
    double range_res = 0.25, doppler_res = 0.25;
    double lambda_base = 0.2;
    int alias_copies = 3;
    double max_power_db = 0.0;  // global max of level 1

    int levels() const { return static_cast<int>(power.size()); }
    double level_lambda(int s) const;  // lambda_base / 2^(s-1), s is 1-based
};

struct ScaleSpaceConfig {
    int s_levels = 3;
    double gaussian_sigma = 1.0;  // bins, doubling per level
    int alias_copies = 3;         // odd
    double lambda_base = 0.2;
};

RdScaleSpace build_scalespace(const RdMap& rd, const ScaleSpaceConfig& cfg = {});

/// Bilinear sample of power and of the precomputed gradient grid at the
/// continuous (range, velocity) coordinate. Out-of-grid queries clamp to the
/// border, return zero gradient, and report in_grid = false.
ScaleSample sample_scalespace(const RdScaleSpace& ss, int s, double range_m, double v_mps);

}  // namespace radwarp
