#pragma once

#include "radwarp/scene.hpp"

namespace radwarp {

/// Ego-frame background transform (frame k -> k+1) for static world points.
RigidTransform ego_background_transform(const EgoMotion& ego);

/// Camera-frame background transform: camera@k+1 coordinates of a static
/// point from its camera@k coordinates.
RigidTransform camera_background_transform(const EgoMotion& ego, const Calibration& calib);

/// Render both frames of a scene through the calibrated camera. Depth and
/// instance planes carry the configured noise; optical flow and ground-truth
/// scene flow derive from the noise-free geometry (flow gets its own noise).
FrameBundle render_frame(const Scene& scene, const Calibration& calib);

/// Per-pixel background scene flow (camera frame, m/s) from dense depth.
/// Output planes are zero where valid == 0.
void background_flow_field(const EgoMotion& ego, const Calibration& calib,
                           const GridD& depth, const GridB& valid, GridD& out_x,
                           GridD& out_y, GridD& out_z);

/// DBSCAN over 3-D points, Euclidean metric. Returns per-point cluster labels
/// (0..n_clusters-1) or -1 for noise. Deterministic: clusters are numbered by
/// their lowest member index.
std::vector<int> dbscan(const std::vector<Vec3>& pts, double eps, int min_pts);

struct DbscanParams {
    double eps = 0.3;  // m
    int min_pts = 4;
};

/// Build the solver gating sets from rendered fields. Instances whose densest
/// cluster is smaller than min_pts are dropped with a warning on stderr.
PixelSets build_pixel_sets(const PixelField& field, const Calibration& calib,
                           const DbscanParams& db = {});

}  // namespace radwarp
