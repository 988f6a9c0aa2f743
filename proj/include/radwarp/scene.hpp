#pragma once

#include "radwarp/core.hpp"
#include "radwarp/geometry.hpp"

#include <map>
#include <string>
#include <vector>

namespace radwarp {

enum class ObjectClass { Pedestrian, Car, Truck, Bicycle, Motorbike, Static };

const char* class_name(ObjectClass c);
ObjectClass class_from_name(const std::string& name);
inline bool is_foreground(ObjectClass c) { return c != ObjectClass::Static; }

/// A reflector patch: a flat disc facing the camera at time k, moving with a
/// constant over-ground velocity. Discs stand in for object surfaces; each
/// rasterizes to a blob of pixels and to one radar scatterer at its center.
struct SceneObject {
    Vec3 position = Vec3::Zero();  // disc center, world frame (= ego frame at k), m
    Vec3 velocity = Vec3::Zero();  // over-ground velocity, world frame, m/s
    double rcs = 1.0;              // m^2
    ObjectClass cls = ObjectClass::Car;
    int instance_id = 1;           // unique per scene for non-static classes
    double extent = 0.5;           // disc radius, m
};

/// Ego displacement from frame k to k+1. rotation_bg / translation_bg are the
/// ego pose delta (yaw about the rear axle, then translation); a static world
/// point's ego coordinates update as R*(x + x_ra) - x_ra - t.
struct EgoMotion {
    Mat3 rotation_bg = Mat3::Identity();
    Vec3 translation_bg = Vec3::Zero();  // ego displacement per frame, m
    Vec3 rear_axle = Vec3(-1.0, 0.0, 0.0);
    double dt = 0.1;  // s

    double speed_mps() const { return translation_bg.norm() / dt; }
};

struct NoiseConfig {
    double depth_sigma = 0.0;  // m, per pixel, both frames
    double flow_sigma = 0.0;   // px, per pixel per axis
    int mask_morph = 0;        // >0 dilate instance blobs, <0 erode, in pixels
};

struct Backdrop {
    bool enabled = true;
    double distance = 40.0;  // wall plane at world x = distance
    double rcs = 0.0;        // wall is camera-only unless given a positive rcs
};

struct Scene {
    std::vector<SceneObject> objects;
    Backdrop backdrop;
    EgoMotion ego;
    NoiseConfig noise;
    std::uint64_t seed = 0;
};

/// Dense camera-raster fields at one timestamp. Pixels with valid == 0 carry
/// no data and are excluded from every reduction.
struct PixelField {
    int width = 0, height = 0;
    GridD depth;             // m
    GridI instance;          // instance id; -1 where invalid
    GridI cls;               // ObjectClass as int; Static where background
    GridD flow_u, flow_v;    // optical flow k -> k+1, px
    GridD sf_x, sf_y, sf_z;  // ground-truth total scene flow, camera frame, m/s
    GridB valid;

    void allocate(int w, int h);
    int index(int u, int v) const { return v * width + u; }
};

/// Fields at k plus the k+1 depth raster needed for rigid measurements.
struct FrameBundle {
    PixelField k;
    GridD depth_k1;
    GridI instance_k1;
    GridB valid_k1;
};

/// Solver gating sets. Pixel linear indices (v*width + u), ascending.
struct PixelSets {
    std::vector<int> fg;
    std::vector<int> radar;
    std::map<int, std::vector<int>> dbscan;  // instance -> densest cluster
    std::map<int, std::vector<int>> valid;   // instance -> P_i = dbscan & radar
    std::vector<int> train;                  // radar & SNR gate, filled by pipeline
};

}  // namespace radwarp
