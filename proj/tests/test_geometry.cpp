#include "radwarp/geometry.hpp"

#include <doctest.h>

#include <stdexcept>

using namespace radwarp;

TEST_CASE("rigid transforms compose and invert consistently") {
    const Mat3 r = rot_z(deg2rad(30.0));
    const RigidTransform t_ab = RigidTransform::make(FrameId::Ego, FrameId::Radar, r,
                                                     Vec3(1.0, -2.0, 0.5));
    const Vec3 x(3.0, 4.0, 5.0);

    // Oracle: apply the definition by hand.
    const Vec3 expect = r * x + Vec3(1.0, -2.0, 0.5);
    CHECK((transform_point(x, t_ab) - expect).norm() < 1e-14);
    CHECK((transform_direction(x, t_ab) - r * x).norm() < 1e-14);

    const RigidTransform inv = inverse(t_ab);
    CHECK(inv.from == FrameId::Radar);
    CHECK(inv.to == FrameId::Ego);
    CHECK((transform_point(transform_point(x, t_ab), inv) - x).norm() < 1e-12);

    const RigidTransform t_bc = RigidTransform::make(FrameId::Radar, FrameId::Camera1,
                                                     rot_z(deg2rad(-10.0)), Vec3(0, 1, 0));
    const RigidTransform t_ac = compose(t_bc, t_ab);
    CHECK(t_ac.from == FrameId::Ego);
    CHECK(t_ac.to == FrameId::Camera1);
    CHECK((transform_point(x, t_ac) - transform_point(transform_point(x, t_ab), t_bc)).norm() <
          1e-12);
}

TEST_CASE("make rejects invalid rotations and mismatched composition") {
    Mat3 bad = Mat3::Identity();
    bad(0, 0) = 2.0;
    CHECK_THROWS_AS(RigidTransform::make(FrameId::Ego, FrameId::Radar, bad, Vec3::Zero()),
                    std::invalid_argument);
    Mat3 reflect = Mat3::Identity();
    reflect(2, 2) = -1.0;  // det = -1
    CHECK_THROWS_AS(
        RigidTransform::make(FrameId::Ego, FrameId::Radar, reflect, Vec3::Zero()),
        std::invalid_argument);

    const RigidTransform a = RigidTransform::identity(FrameId::Ego);
    const RigidTransform b = RigidTransform::identity(FrameId::Radar);
    CHECK_THROWS_AS(compose(a, b), std::invalid_argument);
    CHECK_NOTHROW(compose(b, b));
    CHECK_NOTHROW(compose(b, RigidTransform::make(FrameId::Ego, FrameId::Radar,
                                                  Mat3::Identity(), Vec3::Zero())));
}

TEST_CASE("rot_z rotates x toward y for positive angles") {
    const Mat3 r = rot_z(kPi / 2);
    CHECK((r * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-14);
    CHECK((r * Vec3::UnitY() + Vec3::UnitX()).norm() < 1e-14);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("pinhole projection round-trips and matches a hand case") {
    const CameraIntrinsics k = CameraIntrinsics::make(500, 500, 320, 240, 640, 480);
    // A point one unit right per five units forward projects 100 px right of center.
    const Vec3 x(1.0, 0.0, 5.0);
    const Vec2 p = camera_to_pixel(x, k);
    CHECK(p.x() == doctest::Approx(420.0).epsilon(1e-12));
    CHECK(p.y() == doctest::Approx(240.0).epsilon(1e-12));

    const Vec3 back = pixel_to_camera(Vec2(420.0, 240.0), 5.0, k);
    CHECK((back - x).norm() < 1e-12);

    // Principal point maps to the optical axis.
    const Vec3 axis = pixel_to_camera(Vec2(320.0, 240.0), 7.0, k);
    CHECK((axis - Vec3(0, 0, 7)).norm() < 1e-12);
    CHECK_THROWS_AS(camera_to_pixel(Vec3(0, 0, 0), k), std::invalid_argument);
}

TEST_CASE("radar FoV is a closed interval and rejects rear points") {
    const RadarFov fov = RadarFov::make(60.0, 10.0);
    CHECK(in_radar_fov(Vec3(10, 0, 0), fov));
    // Exactly on the azimuth boundary: tan(60 deg) * x.
    const double y = std::tan(deg2rad(60.0)) * 10.0;
    CHECK(in_radar_fov(Vec3(10, y, 0), fov));
    CHECK_FALSE(in_radar_fov(Vec3(10, y * 1.001, 0), fov));
    // Elevation boundary.
    const double z = std::tan(deg2rad(10.0)) * 10.0;
    CHECK(in_radar_fov(Vec3(10, 0, z), fov));
    CHECK_FALSE(in_radar_fov(Vec3(10, 0, z * 1.001), fov));
    CHECK_FALSE(in_radar_fov(Vec3(-10, 0, 0), fov));
    CHECK_FALSE(in_radar_fov(Vec3(0, 1, 0), fov));

    CHECK(RadarFov::table_preset().azimuth_halfwidth_deg == doctest::Approx(70.0));
    CHECK(RadarFov::table_preset().elevation_halfwidth_deg == doctest::Approx(10.0));
}

TEST_CASE("azimuth and elevation follow the x-forward y-left z-up convention") {
    CHECK(azimuth_deg(Vec3(1, 1, 0)) == doctest::Approx(45.0));
    CHECK(azimuth_deg(Vec3(1, -1, 0)) == doctest::Approx(-45.0));
    CHECK(elevation_deg(Vec3(1, 0, 1)) == doctest::Approx(45.0));
    CHECK(elevation_deg(Vec3(1, 0, -1)) == doctest::Approx(-45.0));
}

TEST_CASE("surface normal of a fronto-parallel plane points at the camera") {
    const CameraIntrinsics k = CameraIntrinsics::make(500, 500, 320, 240, 640, 480);
    GridD depth = GridD::Constant(480, 640, 5.0);
    GridB valid = GridB::Constant(480, 640, 1);
    const auto n = surface_normal(depth, valid, 320, 240, k);
    REQUIRE(n.has_value());
    // Camera frame: z forward, so "toward the sensor" is -z.
    CHECK((*n - Vec3(0, 0, -1)).norm() < 1e-9);

    // Border and masked pixels have no normal.
    CHECK_FALSE(surface_normal(depth, valid, 0, 240, k).has_value());
    valid(240, 321) = 0;
    CHECK_FALSE(surface_normal(depth, valid, 320, 240, k).has_value());
}

TEST_CASE("surface normal of a slanted plane recovers the analytic tilt") {
    const CameraIntrinsics k = CameraIntrinsics::make(500, 500, 320, 240, 640, 480);
    GridD depth(480, 640);
    GridB valid = GridB::Constant(480, 640, 1);
    // Plane z = 5 + 0.5 * x_cam, i.e. n proportional to (0.5, 0, -1).
    for (int v = 0; v < 480; ++v)
        for (int u = 0; u < 640; ++u) {
            // Solve z = 5 + 0.5 * z * (u - cx) / fx for z.
            const double a = 0.5 * (u - 320.0) / 500.0;
            depth(v, u) = 5.0 / (1.0 - a);
        }
    const auto n = surface_normal(depth, valid, 320, 240, k);
    REQUIRE(n.has_value());
    const Vec3 expect = Vec3(0.5, 0.0, -1.0).normalized();
    CHECK((*n - expect).norm() < 1e-6);
}

TEST_CASE("aspect cosine is the normalized dot product") {
    CHECK(aspect_cosine(Vec3(2, 0, 0), Vec3(-1, 0, 0)) == doctest::Approx(-1.0));
    CHECK(aspect_cosine(Vec3(1, 0, 0), Vec3(0, 3, 0)) == doctest::Approx(0.0));
    CHECK(aspect_cosine(Vec3(1, 1, 0), Vec3(1, 0, 0)) ==
          doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("default rig places the camera and radar per the documented layout") {
    const Calibration c = Calibration::default_rig();
    CHECK(c.intrinsics.width == 640);
    CHECK(c.intrinsics.height == 480);
    CHECK(c.intrinsics.fx == doctest::Approx(500.0));

    // Ego point 10 m ahead of the camera mount maps onto the optical axis.
    const Vec3 x_cam = transform_point(Vec3(12.0, 0.0, 1.2), c.cam_from_ego);
    CHECK((x_cam - Vec3(0, 0, 10)).norm() < 1e-12);

    // Ego +y (left) is camera -x; ego +z (up) is camera -y.
    const Vec3 left = transform_direction(Vec3(0, 1, 0), c.cam_from_ego);
    CHECK((left - Vec3(-1, 0, 0)).norm() < 1e-12);
    const Vec3 up = transform_direction(Vec3(0, 0, 1), c.cam_from_ego);
    CHECK((up - Vec3(0, -1, 0)).norm() < 1e-12);

    // Radar frame is axis-aligned with ego, mounted forward and low.
    const Vec3 x_rad = transform_point(Vec3(3.5, 0.0, 0.5), c.radar_from_ego);
    CHECK(x_rad.norm() < 1e-12);

    // radar_from_cam chains the two extrinsics.
    const Vec3 via = transform_point(x_cam, c.radar_from_cam());
    const Vec3 direct = transform_point(Vec3(12.0, 0.0, 1.2), c.radar_from_ego);
    CHECK((via - direct).norm() < 1e-12);
}

TEST_CASE("frame names round-trip") {
    for (FrameId f : {FrameId::Ego, FrameId::Camera1, FrameId::Camera2, FrameId::Lidar1,
                      FrameId::Lidar2, FrameId::Radar, FrameId::Dgps}) {
        CHECK(frame_from_name(frame_name(f)) == f);
    }
    CHECK_THROWS_AS(frame_from_name("submarine"), std::invalid_argument);
}
