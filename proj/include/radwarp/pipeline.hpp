#pragma once

#include "radwarp/doa_net.hpp"
#include "radwarp/eval.hpp"
#include "radwarp/radar_dsp.hpp"
#include "radwarp/scene_sim.hpp"
#include "radwarp/sceneflow.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace radwarp {

/// Config files are JSON; missing keys fall back to the documented defaults.
Calibration calibration_from_json(const nlohmann::json& j);
Calibration load_calibration(const std::string& path);

Scene scene_from_json(const nlohmann::json& j);
Scene load_scene(const std::string& path);

RadarParams radar_params_from_json(const nlohmann::json& j);

struct SensingConfig {
    RadarParams params;
    double object_snr_db = 30.0;  // peak per-antenna SNR of a unit-RCS object
    double snr_gate_db = 10.0;    // training-pixel SNR gate
    CfarConfig cfar;
    ScaleSpaceConfig scales;
    bool build_scales = true;
};

/// Everything derived from one scene: rendered frames, gating sets, the
/// synthesized spectrum with its noise floor, the scale space and the
/// ground-truth warp grid.
struct FrameArtifacts {
    Scene scene;
    FrameBundle bundle;
    PixelSets sets;
    std::vector<RadarObs> obs;
    RdSpectrum spec;
    RdMap rd;
    GridD snr_db;
    RdScaleSpace ss;
    WarpGrid wg;
    std::vector<std::vector<std::int32_t>> bin_pixels;
    GridD bg_x, bg_y, bg_z;  // per-pixel background flow, camera frame
    double rd_target_db = 0.0;
};

FrameArtifacts sense_frame(const Scene& scene, const Calibration& calib,
                           const SensingConfig& cfg);

/// Measurement bundle for one instance over its gated pixel set. Rigid
/// correspondences sample the k+1 depth plane at the flow target when all
/// four bilinear corners are valid.
ObjectProblem make_object_problem(int instance_id, const FrameArtifacts& fa,
                                  const Calibration& calib);

/// Solve every gated instance. `use_radar` false zeroes the radar weight.
std::map<int, SolverReport> solve_objects(const FrameArtifacts& fa,
                                          const Calibration& calib,
                                          const SolverConfig& cfg, bool use_radar = true);

/// Dense estimated total flow: background flow everywhere, plus the solved
/// foreground flow on each instance's gated pixels.
void estimated_flow_planes(const FrameArtifacts& fa,
                           const std::map<int, SolverReport>& sols, GridD& out_x,
                           GridD& out_y, GridD& out_z);

/// Union of the per-instance gated pixel sets, ascending.
std::vector<int> sceneflow_eval_pixels(const FrameArtifacts& fa);

struct MtiEval {
    std::vector<int> pixels;
    std::vector<double> probability;  // stationary score per pixel
    std::vector<int> reference;       // 1 = moving
};

/// Per-pixel moving-target scores from the solved flows against reference
/// labels from the ground-truth foreground flow, restricted to pixels whose
/// nearest RD bin clears min_snr_db.
MtiEval mti_fields(const FrameArtifacts& fa, const Calibration& calib,
                   const std::map<int, SolverReport>& sols, double sigma_e,
                   double alpha, double min_snr_db);

/// Training sample: features with the power channel floor-referenced as
/// SNR/10, linear power, the warp grid, labels and the gated pixel sets.
DoaSample make_doa_sample(const FrameArtifacts& fa, const Calibration& calib);

/// Per-bin monopulse azimuth map (degrees) for baseline comparisons.
GridD monopulse_map(const RdSpectrum& spec);

struct RandomSceneSpec {
    int n_objects = 4;
    double range_min = 8.0, range_max = 17.0;   // m, from the ego origin
    double az_span_deg = 18.0;                  // lateral placement span
    double z_min = 0.3, z_max = 0.9;            // m
    double extent_min = 0.25, extent_max = 0.45;  // disc radius, m
    double v_radial_max = 6.0;                  // m/s; ignored with fixed speeds
    std::vector<double> radial_speeds;          // optional per-object values
    double ego_speed = 5.0;                     // m/s
    double yaw_rate_dps = 0.0;
    double dt = 0.1;
    double backdrop_distance = 20.0;            // inside the radar grid
    double backdrop_rcs = 0.004;                // weak wall clutter
    NoiseConfig noise;
};

/// Deterministic random scene; objects get distinct ranges and azimuths and
/// purely radial over-ground velocities (toward/away from the sensor).
Scene random_scene(std::uint64_t seed, const RandomSceneSpec& spec);

/// n_frames snapshots of the same scene advanced by its own motion; each
/// frame gets a distinct noise seed.
std::vector<Scene> scene_sequence(std::uint64_t seed, int n_frames,
                                  const RandomSceneSpec& spec);

struct DatasetSplit {
    std::vector<Scene> train, val, test;
};

/// Sequence-level split (default 70/15/15): all frames of a sequence land in
/// the same partition.
DatasetSplit doa_dataset(std::uint64_t seed, int n_sequences, int frames_per_seq,
                         const RandomSceneSpec& spec, double train_frac = 0.70,
                         double val_frac = 0.15);

/// "config + seed + git describe" provenance record; no timestamps or host
/// state, so identical runs write identical manifests.
void write_manifest(const std::string& out_dir, const nlohmann::json& config,
                    std::uint64_t seed);

std::string git_describe();

/// 10^(db/10) elementwise.
GridD db_to_linear(const GridD& db);

}  // namespace radwarp
