#pragma once

#include "radwarp/core.hpp"

#include <optional>
#include <string>

namespace radwarp {

enum class FrameId { Ego, Camera1, Camera2, Lidar1, Lidar2, Radar, Dgps };

const char* frame_name(FrameId f);
FrameId frame_from_name(const std::string& name);

/// Rigid map x_to = R * x_from + t between two named frames.
struct RigidTransform {
    FrameId from = FrameId::Ego;
    FrameId to = FrameId::Ego;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    /// Validated constructor: rejects non-orthonormal or reflecting rotations
    /// (max |R^T R - I| must stay below 1e-9 and det(R) must be +1).
    static RigidTransform make(FrameId from, FrameId to, const Mat3& rotation,
                               const Vec3& translation);
    static RigidTransform identity(FrameId frame);
};

Vec3 transform_point(const Vec3& x, const RigidTransform& t);
Vec3 transform_direction(const Vec3& d, const RigidTransform& t);
RigidTransform compose(const RigidTransform& t_ab, const RigidTransform& t_bc);
RigidTransform inverse(const RigidTransform& t);

/// Right-handed rotation about z by angle (radians).
Mat3 rot_z(double angle);

struct CameraIntrinsics {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;

    static CameraIntrinsics make(double fx, double fy, double cx, double cy, int width,
                                 int height);
};

/// Pinhole back-projection: pixel (u, v) at depth z to a camera-frame point.
Vec3 pixel_to_camera(const Vec2& p, double depth_z, const CameraIntrinsics& k);

/// Pinhole projection. The result may fall outside the raster; callers clip.
Vec2 camera_to_pixel(const Vec3& x, const CameraIntrinsics& k);

struct RadarFov {
    double azimuth_halfwidth_deg = 67.5;
    double elevation_halfwidth_deg = 11.0;

    static RadarFov make(double azimuth_halfwidth_deg, double elevation_halfwidth_deg);
    /// Alternative preset from the sensor datasheet (140/20 deg full widths).
    static RadarFov table_preset() { return make(70.0, 10.0); }
};

/// Radar frame convention: x forward, y left, z up.
/// azimuth = atan2(y, x), elevation = atan2(z, x); closed FoV interval.
/// Points with x <= 0 are behind the sensor and always outside.
bool in_radar_fov(const Vec3& x_radar, const RadarFov& fov);

double azimuth_deg(const Vec3& x_radar);
double elevation_deg(const Vec3& x_radar);

/// Unit surface normal at pixel p from the depth image, camera frame.
/// Cross product of the two diagonals of the 4-neighborhood quad, oriented
/// toward the sensor. nullopt when a neighbor is missing or invalid.
std::optional<Vec3> surface_normal(const GridD& depth, const GridB& valid, int u, int v,
                                   const CameraIntrinsics& k);

/// Cosine similarity between a sensing ray and a surface normal.
double aspect_cosine(const Vec3& ray, const Vec3& normal);

/// Sensor rig: extrinsics of camera and radar relative to the ego frame plus
/// camera intrinsics and radar FoV. Loaded from a JSON file, see README.
struct Calibration {
    RigidTransform cam_from_ego;    // Camera1 <- Ego
    RigidTransform radar_from_ego;  // Radar <- Ego
    CameraIntrinsics intrinsics;
    RadarFov fov;

    RigidTransform ego_from_cam() const { return inverse(cam_from_ego); }
    RigidTransform radar_from_cam() const {
        return compose(radar_from_ego, inverse(cam_from_ego));
    }
    static Calibration default_rig();
};

}  // namespace radwarp
