#include "radwarp/pipeline.hpp"

#include "radwarp/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>

namespace radwarp {

using nlohmann::json;

namespace {

Vec3 vec3_from(const json& j, const char* key, const Vec3& fallback) {
    if (!j.contains(key)) return fallback;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3)
        throw std::invalid_argument(std::string("config: ") + key +
                                    " must be an array of 3 numbers");
    return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

Mat3 forward_camera_rotation() {
    Mat3 r;
    r << 0, -1, 0,
         0, 0, -1,
         1, 0, 0;
    return r;
}

}  // namespace

Calibration calibration_from_json(const json& j) {
    Calibration c = Calibration::default_rig();
    if (j.contains("camera")) {
        const auto& jc = j.at("camera");
        const Vec3 pos = vec3_from(jc, "position", Vec3(2.0, 0.0, 1.2));
        const Mat3 r_ce = forward_camera_rotation();
        c.cam_from_ego =
            RigidTransform::make(FrameId::Ego, FrameId::Camera1, r_ce, -(r_ce * pos));
        if (jc.contains("intrinsics")) {
            const auto& ji = jc.at("intrinsics");
            c.intrinsics = CameraIntrinsics::make(
                ji.value("fx", 500.0), ji.value("fy", 500.0), ji.value("cx", 320.0),
                ji.value("cy", 240.0), ji.value("width", 640), ji.value("height", 480));
        }
    }
    if (j.contains("radar")) {
        const Vec3 pos = vec3_from(j.at("radar"), "position", Vec3(3.5, 0.0, 0.5));
        c.radar_from_ego =
            RigidTransform::make(FrameId::Ego, FrameId::Radar, Mat3::Identity(), -pos);
    }
    if (j.contains("fov")) {
        const auto& jf = j.at("fov");
        if (jf.value("preset", std::string()) == "table")
            c.fov = RadarFov::table_preset();
        else
            c.fov = RadarFov::make(jf.value("azimuth_halfwidth_deg", 67.5),
                                   jf.value("elevation_halfwidth_deg", 11.0));
    }
    return c;
}

Calibration load_calibration(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open calibration file: " + path);
    json j;
    is >> j;
    return calibration_from_json(j);
}

Scene scene_from_json(const json& j) {
    Scene s;
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("ego")) {
        const auto& je = j.at("ego");
        s.ego.dt = je.value("dt", 0.1);
        if (!(s.ego.dt > 0.0)) throw std::invalid_argument("scene: ego.dt must be > 0");
        const double speed = je.value("speed_mps", 0.0);
        const double yaw = deg2rad(je.value("yaw_rate_dps", 0.0)) * s.ego.dt;
        s.ego.translation_bg = Vec3(speed * s.ego.dt, 0.0, 0.0);
        s.ego.rotation_bg = rot_z(yaw);
        s.ego.rear_axle = vec3_from(je, "rear_axle", Vec3(-1.0, 0.0, 0.0));
    }
    if (j.contains("noise")) {
        const auto& jn = j.at("noise");
        s.noise.depth_sigma = jn.value("depth_sigma", 0.0);
        s.noise.flow_sigma = jn.value("flow_sigma", 0.0);
        s.noise.mask_morph = jn.value("mask_morph", 0);
    }
    if (j.contains("backdrop")) {
        const auto& jb = j.at("backdrop");
        s.backdrop.enabled = jb.value("enabled", true);
        s.backdrop.distance = jb.value("distance", 40.0);
        s.backdrop.rcs = jb.value("rcs", 0.0);
    }
    int next_id = 1;
    for (const auto& jo : j.value("objects", json::array())) {
        SceneObject o;
        o.cls = class_from_name(jo.value("class", std::string("car")));
        o.position = vec3_from(jo, "position", Vec3(10.0, 0.0, 0.5));
        o.velocity = vec3_from(jo, "velocity", Vec3::Zero());
        o.rcs = jo.value("rcs", 1.0);
        o.extent = jo.value("extent", 0.5);
        o.instance_id = jo.value("instance", next_id);
        next_id = std::max(next_id, o.instance_id) + 1;
        s.objects.push_back(o);
    }
    return s;
}

Scene load_scene(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open scene file: " + path);
    json j;
    is >> j;
    return scene_from_json(j);
}

RadarParams radar_params_from_json(const json& j) {
    RadarParams p;
    if (!j.contains("radar")) return p;
    const auto& jr = j.at("radar");
    p.range_res = jr.value("range_res", p.range_res);
    p.doppler_res = jr.value("doppler_res", p.doppler_res);
    p.max_range = jr.value("max_range", p.max_range);
    p.max_doppler = jr.value("max_doppler", p.max_doppler);
    p.element_spacing = jr.value("element_spacing", p.element_spacing);
    p.noise_power = jr.value("noise_power", p.noise_power);
    p.gain = jr.value("gain", p.gain);
    return p;
}

FrameArtifacts sense_frame(const Scene& scene, const Calibration& calib,
                           const SensingConfig& cfg) {
    FrameArtifacts fa;
    fa.scene = scene;
    fa.bundle = render_frame(scene, calib);
    fa.sets = build_pixel_sets(fa.bundle.k, calib);
    fa.obs = radar_observations(scene, calib);

    // Rescale each scatterer so a unit-RCS object peaks at object_snr_db
    // regardless of range; the scene RCS then acts as a relative factor.
    // The backdrop contributes wall clutter through the same normalization
    // but stays out of fa.obs, which is the object-level record.
    std::vector<RadarObs> scaled = fa.obs;
    const std::vector<RadarObs> wall = backdrop_observations(scene, calib, cfg.params);
    scaled.insert(scaled.end(), wall.begin(), wall.end());
    if (cfg.params.noise_power > 0.0) {
        const double amp = amplitude_for_snr(cfg.object_snr_db, cfg.params);
        for (auto& o : scaled) {
            const double range2 = o.x_radar.squaredNorm();
            const double a = amp * std::sqrt(o.rcs) * range2 / cfg.params.gain;
            o.rcs = a * a;
        }
    }
    fa.spec = synth_spectrum(scaled, cfg.params, scene.seed);
    fa.rd = rd_power(fa.spec);
    const GridB detections = cfar_detect(fa.rd, cfg.cfar);
    fa.rd.noise_floor_db = noise_floor(fa.rd, detections);
    fa.rd.has_floor = true;
    fa.snr_db = snr_map(fa.rd);
    if (cfg.build_scales) fa.ss = build_scalespace(fa.rd, cfg.scales);
    fa.rd_target_db = fa.rd.power_db.maxCoeff();

    const PixelField& pf = fa.bundle.k;
    fa.wg = build_warp_grid(pf.depth, pf.valid, pf.sf_x, pf.sf_y, pf.sf_z, calib,
                            cfg.params, cfg.scales.alias_copies);
    fa.bin_pixels = warped_index_sets(fa.wg);
    background_flow_field(scene.ego, calib, pf.depth, pf.valid, fa.bg_x, fa.bg_y, fa.bg_z);

    const int cols = static_cast<int>(fa.snr_db.cols());
    for (size_t bin = 0; bin < fa.bin_pixels.size(); ++bin) {
        if (fa.bin_pixels[bin].empty()) continue;
        const int br = static_cast<int>(bin) / cols, bc = static_cast<int>(bin) % cols;
        if (fa.snr_db(br, bc) <= cfg.snr_gate_db) continue;
        for (std::int32_t p : fa.bin_pixels[bin]) fa.sets.train.push_back(p);
    }
    std::sort(fa.sets.train.begin(), fa.sets.train.end());
    return fa;
}

namespace {

std::optional<double> bilinear_depth(const GridD& depth, const GridB& valid, double u,
                                     double v) {
    const int w = static_cast<int>(depth.cols()), h = static_cast<int>(depth.rows());
    if (!(u >= 0.0) || !(v >= 0.0) || u > w - 1 || v > h - 1) return std::nullopt;
    const int u0 = std::min(static_cast<int>(u), w - 2);
    const int v0 = std::min(static_cast<int>(v), h - 2);
    const double fu = u - u0, fv = v - v0;
    for (int dv = 0; dv < 2; ++dv)
        for (int du = 0; du < 2; ++du)
            if (!valid(v0 + dv, u0 + du) || !(depth(v0 + dv, u0 + du) > 0.0))
                return std::nullopt;
    const double d = (1 - fv) * ((1 - fu) * depth(v0, u0) + fu * depth(v0, u0 + 1)) +
                     fv * ((1 - fu) * depth(v0 + 1, u0) + fu * depth(v0 + 1, u0 + 1));
    return d;
}

}  // namespace

ObjectProblem make_object_problem(int instance_id, const FrameArtifacts& fa,
                                  const Calibration& calib) {
    const auto it = fa.sets.valid.find(instance_id);
    if (it == fa.sets.valid.end() || it->second.empty())
        throw std::invalid_argument("make_object_problem: no gated pixels for instance " +
                                    std::to_string(instance_id));
    const PixelField& pf = fa.bundle.k;
    const RigidTransform radar_from_cam = calib.radar_from_cam();

    ObjectProblem p;
    p.instance_id = instance_id;
    p.intr = calib.intrinsics;
    p.dt = fa.scene.ego.dt;
    p.r_radar_from_cam = radar_from_cam.rotation;
    p.ss = fa.ss.power.empty() ? nullptr : &fa.ss;
    p.rd_target_db = fa.rd_target_db;

    for (int idx : it->second) {
        const int u = idx % pf.width, v = idx / pf.width;
        const double z = pf.depth(v, u);
        if (!pf.valid(v, u) || !(z > 0.0)) continue;
        const Vec3 x_k = pixel_to_camera(Vec2(u, v), z, p.intr);
        p.pix.emplace_back(u, v);
        p.x_cam_k.push_back(x_k);
        p.xi_bg.emplace_back(fa.bg_x(v, u), fa.bg_y(v, u), fa.bg_z(v, u));
        p.flow_meas.emplace_back(pf.flow_u(v, u), pf.flow_v(v, u));
        p.has_flow.push_back(1);
        const double tu = u + pf.flow_u(v, u), tv = v + pf.flow_v(v, u);
        const auto z1 = bilinear_depth(fa.bundle.depth_k1, fa.bundle.valid_k1, tu, tv);
        p.has_rigid.push_back(z1 ? 1 : 0);
        p.x_cam_k1.push_back(z1 ? pixel_to_camera(Vec2(tu, tv), *z1, p.intr)
                                : Vec3::Zero());
        p.x_radar.push_back(transform_point(x_k, radar_from_cam));
    }
    if (p.pix.empty())
        throw std::invalid_argument("make_object_problem: all pixels degenerate");
    return p;
}

std::map<int, SolverReport> solve_objects(const FrameArtifacts& fa,
                                          const Calibration& calib,
                                          const SolverConfig& cfg, bool use_radar) {
    SolverConfig c = cfg;
    if (!use_radar || fa.ss.power.empty()) c.weights.lambda_radar = 0.0;
    std::map<int, SolverReport> sols;
    for (const auto& [inst, px] : fa.sets.valid) {
        if (px.empty()) continue;
        const ObjectProblem p = make_object_problem(inst, fa, calib);
        sols[inst] = gn_solve(p, c);
    }
    return sols;
}

void estimated_flow_planes(const FrameArtifacts& fa,
                           const std::map<int, SolverReport>& sols, GridD& out_x,
                           GridD& out_y, GridD& out_z) {
    out_x = fa.bg_x;
    out_y = fa.bg_y;
    out_z = fa.bg_z;
    const int w = fa.bundle.k.width;
    for (const auto& [inst, rep] : sols) {
        const auto it = fa.sets.valid.find(inst);
        if (it == fa.sets.valid.end()) continue;
        for (int idx : it->second) {
            const int u = idx % w, v = idx / w;
            out_x(v, u) += rep.xi.x();
            out_y(v, u) += rep.xi.y();
            out_z(v, u) += rep.xi.z();
        }
    }
}

std::vector<int> sceneflow_eval_pixels(const FrameArtifacts& fa) {
    std::vector<int> out;
    for (const auto& [inst, px] : fa.sets.valid)
        out.insert(out.end(), px.begin(), px.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

MtiEval mti_fields(const FrameArtifacts& fa, const Calibration& calib,
                   const std::map<int, SolverReport>& sols, double sigma_e, double alpha,
                   double min_snr_db) {
    const PixelField& pf = fa.bundle.k;
    std::vector<char> eligible(static_cast<size_t>(pf.width) * pf.height, 0);
    const int cols = static_cast<int>(fa.snr_db.cols());
    for (size_t bin = 0; bin < fa.bin_pixels.size(); ++bin) {
        if (fa.bin_pixels[bin].empty()) continue;
        const int br = static_cast<int>(bin) / cols, bc = static_cast<int>(bin) % cols;
        if (fa.snr_db(br, bc) <= min_snr_db) continue;
        for (std::int32_t p : fa.bin_pixels[bin]) eligible[p] = 1;
    }

    const RigidTransform radar_from_cam = calib.radar_from_cam();
    MtiEval out;
    for (const auto& [inst, rep] : sols) {
        const auto it = fa.sets.valid.find(inst);
        if (it == fa.sets.valid.end()) continue;
        for (int idx : it->second) {
            if (!eligible[idx]) continue;
            const int u = idx % pf.width, v = idx / pf.width;
            const double z = pf.depth(v, u);
            if (!pf.valid(v, u) || !(z > 0.0)) continue;
            const Vec3 x_r = transform_point(
                pixel_to_camera(Vec2(u, v), z, calib.intrinsics), radar_from_cam);
            const double range = x_r.norm();
            if (range < 1e-9) continue;
            const double mu =
                (x_r / range).dot(radar_from_cam.rotation * rep.xi);
            const Vec3 xi_fg_true(pf.sf_x(v, u) - fa.bg_x(v, u),
                                  pf.sf_y(v, u) - fa.bg_y(v, u),
                                  pf.sf_z(v, u) - fa.bg_z(v, u));
            out.pixels.push_back(idx);
            out.probability.push_back(mti_probability(mu, sigma_e, alpha));
            out.reference.push_back(mti_reference(xi_fg_true) == MtiLabel::Moving ? 1 : 0);
        }
    }
    return out;
}

DoaSample make_doa_sample(const FrameArtifacts& fa, const Calibration& calib) {
    DoaSample s;
    s.features = build_features(fa.spec);
    // Floor-referenced power keeps the input scale-free across SNR settings.
    s.features.power_db = (s.features.power_db.array() - fa.rd.noise_floor_db) / 10.0;
    s.power_lin = db_to_linear(fa.rd.power_db);
    s.wg = fa.wg;
    s.labels_cam = doa_labels(fa.bundle.k.depth, fa.bundle.k.valid, calib);
    s.train_on = fa.sets.train;
    for (int i = 0; i < fa.wg.pixel_count(); ++i)
        if (fa.wg.valid.data()[i]) s.train_off.push_back(i);
    return s;
}

GridD monopulse_map(const RdSpectrum& spec) {
    const int rows = static_cast<int>(spec.u[0].rows());
    const int cols = static_cast<int>(spec.u[0].cols());
    GridD out(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out(r, c) = doa_monopulse(spec, r, c).azimuth_deg;
    return out;
}

Scene random_scene(std::uint64_t seed, const RandomSceneSpec& spec) {
    Scene s;
    s.seed = seed;
    s.ego.dt = spec.dt;
    s.ego.translation_bg = Vec3(spec.ego_speed * spec.dt, 0.0, 0.0);
    s.ego.rotation_bg = rot_z(deg2rad(spec.yaw_rate_dps) * spec.dt);
    s.backdrop.distance = spec.backdrop_distance;
    s.backdrop.rcs = spec.backdrop_rcs;
    s.noise = spec.noise;

    const ObjectClass classes[] = {ObjectClass::Car, ObjectClass::Pedestrian,
                                   ObjectClass::Truck, ObjectClass::Bicycle};
    const Vec3 radar_pos(3.5, 0.0, 0.5);
    auto rnd = [&](int i, int j) {
        return uniform01(seed ^ 0x5ce9e5000000ull ^
                         (static_cast<std::uint64_t>(i) * 16 + j));
    };
    const int n = spec.n_objects;
    for (int i = 0; i < n; ++i) {
        SceneObject o;
        // Stratified range and azimuth slots keep the objects separated in
        // both the RD map and the image.
        const double range =
            spec.range_min +
            (spec.range_max - spec.range_min) * (i + 0.2 + 0.6 * rnd(i, 0)) / n;
        const int slot = (i % 2 == 0) ? i / 2 : n - 1 - i / 2;  // interleave sides
        const double az = deg2rad(spec.az_span_deg) *
                          (-1.0 + 2.0 * (slot + 0.15 + 0.7 * rnd(i, 1)) / n);
        const double z = spec.z_min + (spec.z_max - spec.z_min) * rnd(i, 2);
        o.position = Vec3(range * std::cos(az), range * std::sin(az), z);
        double v_rad;
        if (!spec.radial_speeds.empty())
            v_rad = spec.radial_speeds[i % spec.radial_speeds.size()];
        else
            v_rad = spec.v_radial_max * (2.0 * rnd(i, 3) - 1.0);
        const Vec3 dir = (o.position - radar_pos).normalized();
        o.velocity = v_rad * dir;
        o.extent = spec.extent_min + (spec.extent_max - spec.extent_min) * rnd(i, 4);
        o.rcs = 1.0;
        o.cls = classes[i % 4];
        o.instance_id = i + 1;
        s.objects.push_back(o);
    }
    return s;
}

std::vector<Scene> scene_sequence(std::uint64_t seed, int n_frames,
                                  const RandomSceneSpec& spec) {
    std::vector<Scene> frames;
    Scene cur = random_scene(seed, spec);
    for (int j = 0; j < n_frames; ++j) {
        cur.seed = mix64(seed ^ (static_cast<std::uint64_t>(j) * 0x9e3779b97f4a7c15ull));
        frames.push_back(cur);
        // Advance the world by one frame and re-express it in the new ego frame.
        const RigidTransform t_bg = ego_background_transform(cur.ego);
        for (auto& o : cur.objects) {
            o.position = transform_point(o.position + cur.ego.dt * o.velocity, t_bg);
            o.velocity = cur.ego.rotation_bg * o.velocity;
        }
        // The wall is world-fixed; track its on-axis point through the ego
        // motion (exact for pure translation, first order under yaw).
        cur.backdrop.distance =
            transform_point(Vec3(cur.backdrop.distance, 0.0, 0.0), t_bg).x();
    }
    return frames;
}

DatasetSplit doa_dataset(std::uint64_t seed, int n_sequences, int frames_per_seq,
                         const RandomSceneSpec& spec, double train_frac,
                         double val_frac) {
    if (n_sequences < 3)
        throw std::invalid_argument("doa_dataset: needs at least 3 sequences");
    int n_train = std::max(1, static_cast<int>(std::lround(train_frac * n_sequences)));
    int n_val = std::max(1, static_cast<int>(std::lround(val_frac * n_sequences)));
    while (n_train + n_val >= n_sequences) (n_train > 1 ? n_train : n_val) -= 1;

    DatasetSplit split;
    for (int sq = 0; sq < n_sequences; ++sq) {
        const auto frames = scene_sequence(
            mix64(seed ^ (static_cast<std::uint64_t>(sq + 1) << 24)), frames_per_seq,
            spec);
        auto& dst = sq < n_train ? split.train
                                 : (sq < n_train + n_val ? split.val : split.test);
        dst.insert(dst.end(), frames.begin(), frames.end());
    }
    return split;
}

std::string git_describe() {
    FILE* pipe = ::popen("git describe --always --dirty 2>/dev/null", "r");
    if (!pipe) return "unknown";
    char buf[256] = {0};
    std::string out;
    while (std::fgets(buf, sizeof(buf), pipe)) out += buf;
    ::pclose(pipe);
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return out.empty() ? "unknown" : out;
}

void write_manifest(const std::string& out_dir, const json& config, std::uint64_t seed) {
    std::filesystem::create_directories(out_dir);
    json m;
    m["config"] = config;
    m["seed"] = seed;
    m["version"] = git_describe();
    std::ofstream os(out_dir + "/manifest.json");
    if (!os) throw std::runtime_error("cannot write manifest in " + out_dir);
    os << m.dump(2) << "\n";
}

GridD db_to_linear(const GridD& db) {
    return (db.array() * (std::log(10.0) / 10.0)).exp();
}

}  // namespace radwarp
