#include "radwarp/scene_sim.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace radwarp {

const char* class_name(ObjectClass c) {
    switch (c) {
        case ObjectClass::Pedestrian: return "pedestrian";
        case ObjectClass::Car: return "car";
        case ObjectClass::Truck: return "truck";
        case ObjectClass::Bicycle: return "bicycle";
        case ObjectClass::Motorbike: return "motorbike";
        case ObjectClass::Static: return "static";
    }
    return "?";
}

ObjectClass class_from_name(const std::string& name) {
    for (ObjectClass c : {ObjectClass::Pedestrian, ObjectClass::Car, ObjectClass::Truck,
                          ObjectClass::Bicycle, ObjectClass::Motorbike, ObjectClass::Static}) {
        if (name == class_name(c)) return c;
    }
    throw std::invalid_argument("unknown object class: " + name);
}

void PixelField::allocate(int w, int h) {
    width = w;
    height = h;
    depth = GridD::Zero(h, w);
    instance = GridI::Constant(h, w, -1);
    cls = GridI::Constant(h, w, static_cast<int>(ObjectClass::Static));
    flow_u = GridD::Zero(h, w);
    flow_v = GridD::Zero(h, w);
    sf_x = GridD::Zero(h, w);
    sf_y = GridD::Zero(h, w);
    sf_z = GridD::Zero(h, w);
    valid = GridB::Zero(h, w);
}

RigidTransform ego_background_transform(const EgoMotion& ego) {
    const Mat3& r = ego.rotation_bg;
    return RigidTransform::make(FrameId::Ego, FrameId::Ego, r,
                                r * ego.rear_axle - ego.rear_axle - ego.translation_bg);
}

RigidTransform camera_background_transform(const EgoMotion& ego, const Calibration& calib) {
    return compose(compose(calib.cam_from_ego, ego_background_transform(ego)),
                   calib.ego_from_cam());
}

namespace {

// A planar reflector patch in world coordinates: disc (finite radius) or
// infinite backdrop plane.
struct Patch {
    Vec3 point_w;
    Vec3 normal_w;
    Vec3 velocity_w;
    double radius = 0.0;
    int instance_id = -1;
    ObjectClass cls = ObjectClass::Static;
};

std::vector<Patch> make_patches(const Scene& scene, const Calibration& calib) {
    std::vector<Patch> patches;
    if (scene.backdrop.enabled) {
        Patch wall;
        wall.point_w = Vec3(scene.backdrop.distance, 0.0, 0.0);
        wall.normal_w = Vec3(-1.0, 0.0, 0.0);
        wall.velocity_w = Vec3::Zero();
        wall.radius = std::numeric_limits<double>::infinity();
        wall.instance_id = 0;
        wall.cls = ObjectClass::Static;
        patches.push_back(wall);
    }
    const Vec3 cam_center_w = inverse(calib.cam_from_ego).translation;
    for (const auto& o : scene.objects) {
        Patch d;
        d.point_w = o.position;
        Vec3 n = cam_center_w - o.position;
        const double len = n.norm();
        d.normal_w = len > 1e-12 ? Vec3(n / len) : Vec3(-1, 0, 0);
        d.velocity_w = o.velocity;
        d.radius = std::max(o.extent, 0.0);
        d.instance_id = o.instance_id;
        d.cls = o.cls;
        patches.push_back(d);
    }
    return patches;
}

// Ray-cast all patches into the raster; nearest hit wins. Exact plane
// intersection, so depth oracles are analytic.
void raster_pass(const std::vector<Patch>& patches, const RigidTransform& cam_from_world,
                 const CameraIntrinsics& k, double move_dt, GridD& depth, GridI& patch_of,
                 GridB& valid) {
    const int w = k.width, h = k.height;
    depth = GridD::Zero(h, w);
    patch_of = GridI::Constant(h, w, -1);
    valid = GridB::Zero(h, w);
    struct CamPatch {
        Vec3 n, q;
        double radius;
    };
    std::vector<CamPatch> cp(patches.size());
    for (size_t i = 0; i < patches.size(); ++i) {
        const Vec3 moved = patches[i].point_w + move_dt * patches[i].velocity_w;
        cp[i].n = transform_direction(patches[i].normal_w, cam_from_world);
        cp[i].q = transform_point(moved, cam_from_world);
        cp[i].radius = patches[i].radius;
    }
    parallel_for(h, [&](std::int64_t v) {
        for (int u = 0; u < w; ++u) {
            const Vec3 m((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
            double best_z = std::numeric_limits<double>::infinity();
            int best = -1;
            for (size_t i = 0; i < cp.size(); ++i) {
                const double denom = cp[i].n.dot(m);
                if (std::abs(denom) < 1e-12) continue;
                const double z = cp[i].n.dot(cp[i].q) / denom;
                if (z <= 0.05 || z >= best_z) continue;
                if (std::isfinite(cp[i].radius) &&
                    (z * m - cp[i].q).norm() > cp[i].radius)
                    continue;
                best_z = z;
                best = static_cast<int>(i);
            }
            if (best >= 0) {
                depth(v, u) = best_z;
                patch_of(v, u) = best;
                valid(v, u) = 1;
            }
        }
    });
}

void morph_instances(GridI& inst, GridI& cls, int steps) {
    const int h = static_cast<int>(inst.rows()), w = static_cast<int>(inst.cols());
    const int du[4] = {0, -1, 1, 0};
    const int dv[4] = {-1, 0, 0, 1};
    for (int it = 0; it < std::abs(steps); ++it) {
        GridI next = inst;
        GridI next_cls = cls;
        for (int v = 0; v < h; ++v) {
            for (int u = 0; u < w; ++u) {
                if (steps > 0 && inst(v, u) <= 0) {
                    for (int d = 0; d < 4; ++d) {
                        const int uu = u + du[d], vv = v + dv[d];
                        if (uu < 0 || vv < 0 || uu >= w || vv >= h) continue;
                        if (inst(vv, uu) > 0) {
                            next(v, u) = inst(vv, uu);
                            next_cls(v, u) = cls(vv, uu);
                            break;
                        }
                    }
                } else if (steps < 0 && inst(v, u) > 0) {
                    for (int d = 0; d < 4; ++d) {
                        const int uu = u + du[d], vv = v + dv[d];
                        if (uu < 0 || vv < 0 || uu >= w || vv >= h ||
                            inst(vv, uu) != inst(v, u)) {
                            next(v, u) = 0;
                            next_cls(v, u) = static_cast<int>(ObjectClass::Static);
                            break;
                        }
                    }
                }
            }
        }
        inst = next;
        cls = next_cls;
    }
}

enum NoiseStream : std::uint64_t {
    kDepthK = 0x10,
    kDepthK1 = 0x20,
    kFlowU = 0x30,
    kFlowV = 0x40,
};

double noise_draw(std::uint64_t seed, NoiseStream stream, std::int64_t idx) {
    return gauss_pair(seed ^ (static_cast<std::uint64_t>(stream) << 56) ^
                      static_cast<std::uint64_t>(idx))[0];
}

}  // namespace

FrameBundle render_frame(const Scene& scene, const Calibration& calib) {
    const CameraIntrinsics& k = calib.intrinsics;
    FrameBundle out;
    out.k.allocate(k.width, k.height);

    const std::vector<Patch> patches = make_patches(scene, calib);
    const RigidTransform cam_from_world = calib.cam_from_ego;  // world = ego at k
    const RigidTransform world_from_cam = inverse(cam_from_world);
    const RigidTransform ego_bg = ego_background_transform(scene.ego);
    const RigidTransform cam1_from_world = compose(calib.cam_from_ego, ego_bg);
    const double dt = scene.ego.dt;

    GridD depth_exact;
    GridI patch_of;
    GridB hit;
    raster_pass(patches, cam_from_world, k, 0.0, depth_exact, patch_of, hit);

    PixelField& f = out.k;
    parallel_for(static_cast<std::int64_t>(k.width) * k.height, [&](std::int64_t idx) {
        const int u = static_cast<int>(idx % k.width), v = static_cast<int>(idx / k.width);
        if (!hit(v, u)) return;
        const Patch& pa = patches[patch_of(v, u)];
        const Vec3 x_ck = pixel_to_camera(Vec2(u, v), depth_exact(v, u), k);
        const Vec3 x_w = transform_point(x_ck, world_from_cam);
        const Vec3 x_w1 = x_w + dt * pa.velocity_w;
        const Vec3 x_c1 = transform_point(x_w1, cam1_from_world);
        if (x_c1.z() <= 0.0) return;  // leaves the view frustum half-space
        const Vec2 p1 = camera_to_pixel(x_c1, k);
        f.flow_u(v, u) = p1.x() - u + scene.noise.flow_sigma *
                                          noise_draw(scene.seed, kFlowU, idx);
        f.flow_v(v, u) = p1.y() - v + scene.noise.flow_sigma *
                                          noise_draw(scene.seed, kFlowV, idx);
        const Vec3 sf = (x_c1 - x_ck) / dt;
        f.sf_x(v, u) = sf.x();
        f.sf_y(v, u) = sf.y();
        f.sf_z(v, u) = sf.z();
        f.depth(v, u) = depth_exact(v, u) +
                        scene.noise.depth_sigma * noise_draw(scene.seed, kDepthK, idx);
        f.instance(v, u) = pa.instance_id;
        f.cls(v, u) = static_cast<int>(pa.cls);
        f.valid(v, u) = 1;
    });
    if (scene.noise.mask_morph != 0)
        morph_instances(f.instance, f.cls, scene.noise.mask_morph);

    GridD depth1_exact;
    GridI patch_of1;
    raster_pass(patches, cam1_from_world, k, dt, depth1_exact, patch_of1, out.valid_k1);
    out.depth_k1 = depth1_exact;
    out.instance_k1 = GridI::Constant(k.height, k.width, -1);
    parallel_for(static_cast<std::int64_t>(k.width) * k.height, [&](std::int64_t idx) {
        const int u = static_cast<int>(idx % k.width), v = static_cast<int>(idx / k.width);
        if (!out.valid_k1(v, u)) return;
        out.instance_k1(v, u) = patches[patch_of1(v, u)].instance_id;
        out.depth_k1(v, u) += scene.noise.depth_sigma * noise_draw(scene.seed, kDepthK1, idx);
    });
    return out;
}

void background_flow_field(const EgoMotion& ego, const Calibration& calib,
                           const GridD& depth, const GridB& valid, GridD& out_x,
                           GridD& out_y, GridD& out_z) {
    const CameraIntrinsics& k = calib.intrinsics;
    const RigidTransform t_bg = camera_background_transform(ego, calib);
    out_x = GridD::Zero(depth.rows(), depth.cols());
    out_y = GridD::Zero(depth.rows(), depth.cols());
    out_z = GridD::Zero(depth.rows(), depth.cols());
    parallel_for(depth.size(), [&](std::int64_t idx) {
        const int u = static_cast<int>(idx % depth.cols());
        const int v = static_cast<int>(idx / depth.cols());
        if (!valid(v, u) || !(depth(v, u) > 0.0)) return;
        const Vec3 x = pixel_to_camera(Vec2(u, v), depth(v, u), k);
        const Vec3 xi = (transform_point(x, t_bg) - x) / ego.dt;
        out_x(v, u) = xi.x();
        out_y(v, u) = xi.y();
        out_z(v, u) = xi.z();
    });
}

namespace {

std::uint64_t cell_key(int x, int y, int z) {
    // Pack 21-bit signed cell coordinates; scenes are far smaller than 2^20 cells.
    const std::uint64_t m = (1u << 21) - 1;
    auto enc = [m](int v) { return static_cast<std::uint64_t>(v + (1 << 20)) & m; };
    return enc(x) | (enc(y) << 21) | (enc(z) << 42);
}

}  // namespace

std::vector<int> dbscan(const std::vector<Vec3>& pts, double eps, int min_pts) {
    if (eps <= 0.0) throw std::invalid_argument("dbscan: eps must be > 0");
    if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");
    const int n = static_cast<int>(pts.size());
    std::vector<int> labels(n, -1);
    if (n == 0) return labels;

    std::unordered_map<std::uint64_t, std::vector<int>> cells;
    cells.reserve(static_cast<size_t>(n) * 2);
    auto cell_of = [&](const Vec3& p) {
        return cell_key(static_cast<int>(std::floor(p.x() / eps)),
                        static_cast<int>(std::floor(p.y() / eps)),
                        static_cast<int>(std::floor(p.z() / eps)));
    };
    for (int i = 0; i < n; ++i) cells[cell_of(pts[i])].push_back(i);

    const double eps2 = eps * eps;
    auto neighbors = [&](int i) {
        std::vector<int> out;
        const int cx = static_cast<int>(std::floor(pts[i].x() / eps));
        const int cy = static_cast<int>(std::floor(pts[i].y() / eps));
        const int cz = static_cast<int>(std::floor(pts[i].z() / eps));
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    auto it = cells.find(cell_key(cx + dx, cy + dy, cz + dz));
                    if (it == cells.end()) continue;
                    for (int j : it->second)
                        if ((pts[i] - pts[j]).squaredNorm() <= eps2) out.push_back(j);
                }
        std::sort(out.begin(), out.end());
        return out;
    };

    // The eps-neighborhood includes the point itself, as in the original
    // formulation; a lone point is core only when min_pts == 1.
    std::vector<char> core(n, 0);
    std::vector<std::vector<int>> nbs(n);
    for (int i = 0; i < n; ++i) {
        nbs[i] = neighbors(i);
        core[i] = static_cast<int>(nbs[i].size()) >= min_pts;
    }

    int next_cluster = 0;
    for (int i = 0; i < n; ++i) {
        if (labels[i] != -1 || !core[i]) continue;
        const int cid = next_cluster++;
        std::deque<int> queue{i};
        labels[i] = cid;
        while (!queue.empty()) {
            const int cur = queue.front();
            queue.pop_front();
            if (!core[cur]) continue;
            for (int j : nbs[cur]) {
                if (labels[j] != -1) continue;
                labels[j] = cid;
                if (core[j]) queue.push_back(j);
            }
        }
    }
    return labels;
}

PixelSets build_pixel_sets(const PixelField& field, const Calibration& calib,
                           const DbscanParams& db) {
    PixelSets sets;
    const CameraIntrinsics& k = calib.intrinsics;
    const RigidTransform radar_from_cam = calib.radar_from_cam();

    std::map<int, std::vector<int>> inst_pixels;
    std::map<int, std::vector<Vec3>> inst_points;
    for (int v = 0; v < field.height; ++v) {
        for (int u = 0; u < field.width; ++u) {
            if (!field.valid(v, u) || !(field.depth(v, u) > 0.0)) continue;
            const int idx = field.index(u, v);
            const Vec3 x_c = pixel_to_camera(Vec2(u, v), field.depth(v, u), k);
            if (in_radar_fov(transform_point(x_c, radar_from_cam), calib.fov))
                sets.radar.push_back(idx);
            if (is_foreground(static_cast<ObjectClass>(field.cls(v, u)))) {
                sets.fg.push_back(idx);
                inst_pixels[field.instance(v, u)].push_back(idx);
                inst_points[field.instance(v, u)].push_back(x_c);
            }
        }
    }

    for (const auto& [inst, pixels] : inst_pixels) {
        const auto labels = dbscan(inst_points[inst], db.eps, db.min_pts);
        std::map<int, int> sizes;
        for (int l : labels)
            if (l >= 0) ++sizes[l];
        if (sizes.empty()) {
            std::fprintf(stderr,
                         "build_pixel_sets: instance %d has no cluster of >= %d points, "
                         "excluded\n",
                         inst, db.min_pts);
            continue;
        }
        int best = sizes.begin()->first;
        for (const auto& [l, s] : sizes)
            if (s > sizes[best]) best = l;
        std::vector<int>& keep = sets.dbscan[inst];
        for (size_t i = 0; i < pixels.size(); ++i)
            if (labels[i] == best) keep.push_back(pixels[i]);
        std::vector<int> isect;
        std::set_intersection(keep.begin(), keep.end(), sets.radar.begin(),
                              sets.radar.end(), std::back_inserter(isect));
        if (!isect.empty()) sets.valid[inst] = std::move(isect);
    }
    return sets;
}

}  // namespace radwarp
