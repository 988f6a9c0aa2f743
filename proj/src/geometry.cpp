#include "radwarp/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace radwarp {

const char* frame_name(FrameId f) {
    switch (f) {
        case FrameId::Ego: return "ego";
        case FrameId::Camera1: return "camera1";
        case FrameId::Camera2: return "camera2";
        case FrameId::Lidar1: return "lidar1";
        case FrameId::Lidar2: return "lidar2";
        case FrameId::Radar: return "radar";
        case FrameId::Dgps: return "dgps";
    }
    return "?";
}

FrameId frame_from_name(const std::string& name) {
    for (FrameId f : {FrameId::Ego, FrameId::Camera1, FrameId::Camera2, FrameId::Lidar1,
                      FrameId::Lidar2, FrameId::Radar, FrameId::Dgps}) {
        if (name == frame_name(f)) return f;
    }
    throw std::invalid_argument("unknown frame name: " + name);
}

RigidTransform RigidTransform::make(FrameId from, FrameId to, const Mat3& rotation,
                                    const Vec3& translation) {
    const double ortho_err = (rotation.transpose() * rotation - Mat3::Identity())
                                 .cwiseAbs()
                                 .maxCoeff();
    if (ortho_err >= 1e-9)
        throw std::invalid_argument("RigidTransform: rotation not orthonormal");
    if (rotation.determinant() < 0.0)
        throw std::invalid_argument("RigidTransform: rotation is a reflection");
    return RigidTransform{from, to, rotation, translation};
}

RigidTransform RigidTransform::identity(FrameId frame) {
    return RigidTransform{frame, frame, Mat3::Identity(), Vec3::Zero()};
}

Vec3 transform_point(const Vec3& x, const RigidTransform& t) {
    return t.rotation * x + t.translation;
}

Vec3 transform_direction(const Vec3& d, const RigidTransform& t) { return t.rotation * d; }

RigidTransform compose(const RigidTransform& t_ab, const RigidTransform& t_bc) {
    if (t_ab.from != t_bc.to)
        throw std::invalid_argument("compose: inner frames do not chain");
    RigidTransform out;
    out.from = t_bc.from;
    out.to = t_ab.to;
    out.rotation = t_ab.rotation * t_bc.rotation;
    out.translation = t_ab.rotation * t_bc.translation + t_ab.translation;
    return out;
}

RigidTransform inverse(const RigidTransform& t) {
    RigidTransform out;
    out.from = t.to;
    out.to = t.from;
    out.rotation = t.rotation.transpose();
    out.translation = -(t.rotation.transpose() * t.translation);
    return out;
}

Mat3 rot_z(double angle) {
    Mat3 r;
    const double c = std::cos(angle), s = std::sin(angle);
    r << c, -s, 0, s, c, 0, 0, 0, 1;
    return r;
}

CameraIntrinsics CameraIntrinsics::make(double fx, double fy, double cx, double cy,
                                        int width, int height) {
    if (fx <= 0 || fy <= 0) throw std::invalid_argument("intrinsics: focal lengths must be > 0");
    if (cx < 0 || cx >= width || cy < 0 || cy >= height)
        throw std::invalid_argument("intrinsics: principal point outside raster");
    return CameraIntrinsics{fx, fy, cx, cy, width, height};
}

Vec3 pixel_to_camera(const Vec2& p, double depth_z, const CameraIntrinsics& k) {
    if (depth_z <= 0.0) throw std::invalid_argument("pixel_to_camera: depth must be > 0");
    return Vec3((p.x() - k.cx) / k.fx * depth_z, (p.y() - k.cy) / k.fy * depth_z, depth_z);
}

Vec2 camera_to_pixel(const Vec3& x, const CameraIntrinsics& k) {
    if (x.z() <= 0.0) throw std::invalid_argument("camera_to_pixel: point behind camera");
    return Vec2(k.fx * x.x() / x.z() + k.cx, k.fy * x.y() / x.z() + k.cy);
}

RadarFov RadarFov::make(double az_half, double el_half) {
    if (az_half <= 0 || az_half > 90 || el_half <= 0 || el_half > 90)
        throw std::invalid_argument("RadarFov: halfwidths must be in (0, 90]");
    return RadarFov{az_half, el_half};
}

bool in_radar_fov(const Vec3& x_radar, const RadarFov& fov) {
    if (x_radar.x() <= 0.0) return false;
    const double az = std::abs(rad2deg(std::atan2(x_radar.y(), x_radar.x())));
    const double el = std::abs(rad2deg(std::atan2(x_radar.z(), x_radar.x())));
    return az <= fov.azimuth_halfwidth_deg && el <= fov.elevation_halfwidth_deg;
}

double azimuth_deg(const Vec3& x_radar) {
    return rad2deg(std::atan2(x_radar.y(), x_radar.x()));
}

double elevation_deg(const Vec3& x_radar) {
    return rad2deg(std::atan2(x_radar.z(), x_radar.x()));
}

std::optional<Vec3> surface_normal(const GridD& depth, const GridB& valid, int u, int v,
                                   const CameraIntrinsics& k) {
    if (u < 1 || v < 1 || u + 1 >= k.width || v + 1 >= k.height) return std::nullopt;
    const int us[4] = {u - 1, u + 1, u, u};
    const int vs[4] = {v, v, v - 1, v + 1};
    Vec3 q[4];
    for (int i = 0; i < 4; ++i) {
        if (!valid(vs[i], us[i]) || !(depth(vs[i], us[i]) > 0.0)) return std::nullopt;
        q[i] = pixel_to_camera(Vec2(us[i], vs[i]), depth(vs[i], us[i]), k);
    }
    // Quad diagonals: left->right and up->down neighbors.
    const Vec3 d1 = q[1] - q[0];
    const Vec3 d2 = q[3] - q[2];
    Vec3 n = d1.cross(d2);
    const double len = n.norm();
    if (len < 1e-15) return std::nullopt;
    n /= len;
    if (!valid(v, u) || !(depth(v, u) > 0.0)) return std::nullopt;
    const Vec3 ray = pixel_to_camera(Vec2(u, v), depth(v, u), k);
    if (n.dot(-ray) < 0.0) n = -n;
    return n;
}

double aspect_cosine(const Vec3& ray, const Vec3& normal) {
    const double nr = ray.norm(), nn = normal.norm();
    if (nr < 1e-15 || nn < 1e-15)
        throw std::invalid_argument("aspect_cosine: zero-length vector");
    return ray.dot(normal) / (nr * nn);
}

Calibration Calibration::default_rig() {
    // Ego: x forward, y left, z up. Camera: z forward, x right, y down.
    Mat3 r_ce;
    r_ce << 0, -1, 0,
            0, 0, -1,
            1, 0, 0;
    const Vec3 cam_pos_ego(2.0, 0.0, 1.2);
    const Vec3 radar_pos_ego(3.5, 0.0, 0.5);
    Calibration c;
    c.cam_from_ego =
        RigidTransform::make(FrameId::Ego, FrameId::Camera1, r_ce, -(r_ce * cam_pos_ego));
    c.radar_from_ego = RigidTransform::make(FrameId::Ego, FrameId::Radar, Mat3::Identity(),
                                            -radar_pos_ego);
    c.intrinsics = CameraIntrinsics::make(500.0, 500.0, 320.0, 240.0, 640, 480);
    c.fov = RadarFov::make(67.5, 11.0);
    return c;
}

}  // namespace radwarp
