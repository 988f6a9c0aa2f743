// radwarp: batch front end for the radar-camera cross-modal pipeline.
// Subcommands: simulate, flow, warp, train-doa, eval, report, demo.
// Every run writes a manifest (config snapshot + seed + git describe) next to
// its outputs; identical (config, seed) pairs produce bit-identical artifacts
// regardless of RADWARP_THREADS.

#include "radwarp/io.hpp"
#include "radwarp/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace radwarp;

namespace {

/// Registers every artifact path; on failure the run's outputs are unlinked
/// so a crashed invocation never leaves half-written files behind.
class OutputTracker {
  public:
    std::string track(const std::string& path) {
        paths_.push_back(path);
        return path;
    }
    void discard_all() {
        std::error_code ec;
        for (const auto& p : paths_) fs::remove(p, ec);
    }

  private:
    std::vector<std::string> paths_;
};

struct CommonArgs {
    std::string scene_path;
    std::string calib_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int scales = 3;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool needs_scene) {
    if (needs_scene)
        cmd->add_option("--scene", a.scene_path, "Scene JSON file")->required();
    cmd->add_option("--calib", a.calib_path, "Calibration JSON file");
    cmd->add_option("--out-dir", a.out_dir, "Output directory");
    cmd->add_option("--seed", a.seed, "Seed override")->each([&](const std::string&) {
        a.seed_set = true;
    });
    cmd->add_option("--scales", a.scales, "Scale-space levels")->check(CLI::Range(1, 6));
}

json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    json j;
    is >> j;
    return j;
}

struct LoadedConfig {
    Scene scene;
    Calibration calib;
    RadarParams params;
    double object_snr_db = 30.0;
    json manifest_config;
};

LoadedConfig load_config(const CommonArgs& a, const char* subcommand) {
    LoadedConfig cfg;
    json jscene;
    if (!a.scene_path.empty()) {
        jscene = read_json_file(a.scene_path);
        cfg.scene = scene_from_json(jscene);
        cfg.params = radar_params_from_json(jscene);
        if (jscene.contains("radar"))
            cfg.object_snr_db = jscene["radar"].value("snr_db", 30.0);
    }
    json jcalib;
    if (!a.calib_path.empty()) {
        jcalib = read_json_file(a.calib_path);
        cfg.calib = calibration_from_json(jcalib);
    } else {
        cfg.calib = Calibration::default_rig();
    }
    if (a.seed_set) cfg.scene.seed = a.seed;
    cfg.manifest_config["scene"] = jscene;
    cfg.manifest_config["calib"] = jcalib;
    cfg.manifest_config["scales"] = a.scales;
    cfg.manifest_config["subcommand"] = subcommand;
    return cfg;
}

FrameArtifacts sense_with(const LoadedConfig& cfg, int scales, bool with_scales = true) {
    SensingConfig sc;
    sc.params = cfg.params;
    sc.object_snr_db = cfg.object_snr_db;
    sc.scales.s_levels = scales;
    sc.build_scales = with_scales;
    return sense_frame(cfg.scene, cfg.calib, sc);
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void write_frame_artifacts(const FrameArtifacts& fa, const std::string& out,
                           OutputTracker& t) {
    const PixelField& pf = fa.bundle.k;
    GridFile gf;
    gf.plane_names = {"depth", "instance", "flow_u", "flow_v", "sf_x", "sf_y", "sf_z",
                      "valid"};
    gf.planes = {pf.depth,
                 pf.instance.cast<double>(),
                 pf.flow_u,
                 pf.flow_v,
                 pf.sf_x,
                 pf.sf_y,
                 pf.sf_z,
                 pf.valid.cast<double>()};
    write_grid(t.track(join(out, "frame.rwgrid")), gf);
    write_pgm(t.track(join(out, "depth.pgm")), pf.depth, 0.0, 40.0);
    write_ppm_heat(t.track(join(out, "rd_map.ppm")), fa.rd.power_db, GridB(),
                   fa.rd.noise_floor_db, fa.rd.power_db.maxCoeff());
    write_grid(t.track(join(out, "rd_map.rwgrid")), fa.rd.power_db);
    write_spectrum_planes(t.track(join(out, "spectrum.rwgrid")), fa.spec.u);
}

int cmd_simulate(const CommonArgs& a) {
    const LoadedConfig cfg = load_config(a, "simulate");
    OutputTracker t;
    try {
        write_manifest(a.out_dir, cfg.manifest_config, cfg.scene.seed);
        t.track(join(a.out_dir, "manifest.json"));
        const FrameArtifacts fa = sense_with(cfg, a.scales, false);
        write_frame_artifacts(fa, a.out_dir, t);
        {
            CsvWriter csv(t.track(join(a.out_dir, "observations.csv")),
                          {"instance", "x", "y", "z", "range", "v_radial", "rcs"});
            for (const auto& o : fa.obs)
                csv.row({static_cast<double>(o.instance_id), o.x_radar.x(), o.x_radar.y(),
                         o.x_radar.z(), o.x_radar.norm(), o.v_radial, o.rcs});
        }
        std::printf("simulate: %zu objects, %zu radar targets, noise floor %.2f dB\n",
                    cfg.scene.objects.size(), fa.obs.size(), fa.rd.noise_floor_db);
    } catch (...) {
        t.discard_all();
        throw;
    }
    return 0;
}

int cmd_flow(const CommonArgs& a, bool use_radar) {
    const LoadedConfig cfg = load_config(a, "flow");
    OutputTracker t;
    try {
        write_manifest(a.out_dir, cfg.manifest_config, cfg.scene.seed);
        t.track(join(a.out_dir, "manifest.json"));
        const FrameArtifacts fa = sense_with(cfg, a.scales);
        SolverConfig sc;
        sc.radar_scales = a.scales;
        const auto sols = solve_objects(fa, cfg.calib, sc, use_radar);

        CsvWriter csv(t.track(join(a.out_dir, "flow_solutions.csv")),
                      {"instance", "xi_x", "xi_y", "xi_z", "iterations", "converged",
                       "final_step_m", "energy"});
        for (const auto& [inst, rep] : sols)
            csv.row({static_cast<double>(inst), rep.xi.x(), rep.xi.y(), rep.xi.z(),
                     static_cast<double>(rep.iterations), rep.converged ? 1.0 : 0.0,
                     rep.final_step_m,
                     rep.energy_trace.empty() ? 0.0 : rep.energy_trace.back().total()});

        GridD ex, ey, ez;
        estimated_flow_planes(fa, sols, ex, ey, ez);
        GridFile gf;
        gf.plane_names = {"est_x", "est_y", "est_z"};
        gf.planes = {ex, ey, ez};
        write_grid(t.track(join(a.out_dir, "flow_estimate.rwgrid")), gf);

        const auto px = sceneflow_eval_pixels(fa);
        MetricReport report;
        if (!px.empty()) {
            const PixelField& pf = fa.bundle.k;
            report.has_sf = true;
            report.sf = mae_sceneflow(pf.sf_x, pf.sf_y, pf.sf_z, ex, ey, ez, px);
        }
        write_metric_report(t.track(join(a.out_dir, "metrics.csv")), report);
        std::printf("flow: %zu instances solved, mae_sf %.4f m/s over %ld px\n",
                    sols.size(), report.sf.mae, report.sf.count);
    } catch (...) {
        t.discard_all();
        throw;
    }
    return 0;
}

int cmd_warp(const CommonArgs& a) {
    const LoadedConfig cfg = load_config(a, "warp");
    OutputTracker t;
    try {
        write_manifest(a.out_dir, cfg.manifest_config, cfg.scene.seed);
        t.track(join(a.out_dir, "manifest.json"));
        const FrameArtifacts fa = sense_with(cfg, a.scales, false);
        const WarpField wf = warp_forward(fa.rd.power_db, fa.wg);
        GridFile gf;
        gf.plane_names = {"warped_power_db", "valid"};
        gf.planes = {wf.value, wf.valid.cast<double>()};
        write_grid(t.track(join(a.out_dir, "warped.rwgrid")), gf);
        write_ppm_heat(t.track(join(a.out_dir, "warped.ppm")), wf.value, wf.valid,
                       fa.rd.noise_floor_db, fa.rd.power_db.maxCoeff());
        long n_valid = 0;
        for (int i = 0; i < fa.wg.pixel_count(); ++i)
            if (fa.wg.valid.data()[i]) ++n_valid;
        std::printf("warp: %ld of %d pixels valid\n", n_valid, fa.wg.pixel_count());
    } catch (...) {
        t.discard_all();
        throw;
    }
    return 0;
}

int cmd_train_doa(const CommonArgs& a, const std::string& weights, int kernel,
                  const std::string& snr_mask, const std::string& loss, int steps,
                  int sequences, int frames) {
    CommonArgs args = a;
    LoadedConfig cfg = load_config(args, "train-doa");
    OutputTracker t;
    try {
        cfg.manifest_config["kernel"] = kernel;
        cfg.manifest_config["snr_mask"] = snr_mask;
        cfg.manifest_config["loss"] = loss;
        cfg.manifest_config["steps"] = steps;
        write_manifest(a.out_dir, cfg.manifest_config, cfg.scene.seed);
        t.track(join(a.out_dir, "manifest.json"));

        RandomSceneSpec spec;
        spec.noise.depth_sigma = 0.0;
        const std::uint64_t seed = a.seed_set ? a.seed : 1;
        const DatasetSplit split = doa_dataset(seed, sequences, frames, spec);

        SensingConfig sc;
        sc.params = cfg.params;
        sc.object_snr_db = cfg.object_snr_db;
        sc.scales.s_levels = a.scales;
        sc.build_scales = false;
        const Calibration calib = cfg.calib;
        std::vector<Scene> all = split.train;
        all.insert(all.end(), split.val.begin(), split.val.end());
        const SampleProvider provider = [&](int i) {
            return make_doa_sample(sense_frame(all.at(i), calib, sc), calib);
        };

        DoaNetConfig nc;
        nc.kernel = kernel;
        nc.snr_mask_enabled = snr_mask == "on";
        nc.scale_space_loss = loss == "scalespace";
        nc.loss_levels = a.scales;
        DoaNet net = DoaNet::init(nc, seed);

        TrainConfig tc;
        tc.seed = seed;
        tc.max_steps = steps;
        tc.snr_mask = nc.snr_mask_enabled;
        tc.scale_space = nc.scale_space_loss;
        tc.loss_levels = a.scales;
        tc.metrics_csv = t.track(join(a.out_dir, "train_metrics.csv"));
        const TrainTrace trace = train_doa(net, provider, static_cast<int>(split.train.size()),
                                           static_cast<int>(split.val.size()), tc);

        const std::string wpath = weights.empty() ? join(a.out_dir, "net.rwnet") : weights;
        save_net(t.track(wpath), net);
        std::printf("train-doa: best val mae %.3f deg at step %d, weights at %s\n",
                    trace.best_val_mae, trace.best_step, wpath.c_str());
    } catch (...) {
        t.discard_all();
        throw;
    }
    return 0;
}

int cmd_eval(const CommonArgs& a, const std::string& weights) {
    const LoadedConfig cfg = load_config(a, "eval");
    OutputTracker t;
    try {
        write_manifest(a.out_dir, cfg.manifest_config, cfg.scene.seed);
        t.track(join(a.out_dir, "manifest.json"));
        const FrameArtifacts fa = sense_with(cfg, a.scales);
        MetricReport report;

        SolverConfig sc;
        sc.radar_scales = a.scales;
        const auto sols = solve_objects(fa, cfg.calib, sc, true);
        const auto px = sceneflow_eval_pixels(fa);
        if (!px.empty()) {
            GridD ex, ey, ez;
            estimated_flow_planes(fa, sols, ex, ey, ez);
            const PixelField& pf = fa.bundle.k;
            report.has_sf = true;
            report.sf = mae_sceneflow(pf.sf_x, pf.sf_y, pf.sf_z, ex, ey, ez, px);
        }

        const GridD ref = doa_labels(fa.bundle.k.depth, fa.bundle.k.valid, cfg.calib);
        GridD pred;
        if (!weights.empty()) {
            const DoaNet net = load_net(weights);
            DoaSample sample = make_doa_sample(fa, cfg.calib);
            pred = doa_forward(net, sample.features);
        } else {
            pred = monopulse_map(fa.spec);
        }
        report.has_doa = true;
        report.doa = mae_doa(pred, ref, fa.bin_pixels, fa.snr_db);
        write_doa_bucket_heatmap(t.track(join(a.out_dir, "doa_mae_buckets.pgm")),
                                 report.doa);

        const MtiEval mti = mti_fields(fa, cfg.calib, sols, 0.25, 0.05, 15.0);
        if (!mti.pixels.empty()) {
            report.has_mti = true;
            report.mti_acc = mti_accuracy(mti.probability, mti.reference);
            report.mti_count = static_cast<long>(mti.pixels.size());
        }
        write_metric_report(t.track(join(a.out_dir, "metrics.csv")), report);
        std::printf("eval: mae_sf %.4f m/s, mae_doa %.3f deg over %ld bins, mti %.3f\n",
                    report.sf.mae, report.doa.mae(), report.doa.count, report.mti_acc);
    } catch (...) {
        t.discard_all();
        throw;
    }
    return 0;
}

int cmd_report(const std::string& out_dir) {
    // Consolidates every metrics.csv below out_dir into one summary file.
    std::vector<std::string> files;
    if (fs::exists(out_dir))
        for (const auto& e : fs::recursive_directory_iterator(out_dir))
            if (e.is_regular_file() && e.path().filename() == "metrics.csv")
                files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        std::fprintf(stderr, "report: no metrics.csv under %s\n", out_dir.c_str());
        return 1;
    }
    std::ofstream os(join(out_dir, "report.txt"));
    if (!os) throw std::runtime_error("cannot write report.txt");
    for (const auto& f : files) {
        std::ifstream is(f);
        os << "== " << f << "\n";
        std::string line;
        std::getline(is, line);  // header
        while (std::getline(is, line)) os << "  " << line << "\n";
    }
    std::printf("report: %zu metric files -> %s\n", files.size(),
                join(out_dir, "report.txt").c_str());
    return 0;
}

int cmd_demo(const CommonArgs& a) {
    // Single approaching target: radar-aided flow refinement walkthrough with
    // a per-iteration energy trace and warped RD images.
    CommonArgs args = a;
    LoadedConfig cfg;
    cfg.calib = args.calib_path.empty() ? Calibration::default_rig()
                                        : load_calibration(args.calib_path);
    Scene& s = cfg.scene;
    s.seed = a.seed_set ? a.seed : 7;
    s.ego.dt = 0.1;
    SceneObject o;
    o.position = Vec3(12.0, 0.8, 0.5);
    o.velocity = -3.0 * (o.position - Vec3(3.5, 0.0, 0.5)).normalized();
    o.extent = 0.5;
    o.cls = ObjectClass::Car;
    o.instance_id = 1;
    s.objects.push_back(o);
    s.noise.depth_sigma = 0.15;
    s.noise.flow_sigma = 0.5;
    cfg.manifest_config["subcommand"] = "demo";
    cfg.manifest_config["scales"] = a.scales;

    OutputTracker t;
    try {
        write_manifest(a.out_dir, cfg.manifest_config, s.seed);
        t.track(join(a.out_dir, "manifest.json"));
        const FrameArtifacts fa = sense_with(cfg, a.scales);
        write_frame_artifacts(fa, a.out_dir, t);

        const ObjectProblem p = make_object_problem(1, fa, cfg.calib);
        SolverConfig sc;
        sc.radar_scales = a.scales;
        sc.max_iters = 1;

        const Vec3 dir_cam =
            cfg.calib.radar_from_cam().rotation.transpose() *
            (Vec3(12.0, 0.8, 0.5) - Vec3(3.5, 0.0, 0.5)).normalized();
        Vec3 xi = 1.5 * dir_cam;  // deliberately wrong start, receding
        CsvWriter trace(t.track(join(a.out_dir, "energy_trace.csv")),
                        {"iteration", "energy", "energy_flow", "energy_rigid",
                         "energy_radar", "xi_x", "xi_y", "xi_z", "v_radial"});
        const int max_iters = 100;
        bool converged = false;
        int iters = 0;
        for (int it = 1; it <= max_iters && !converged; ++it) {
            const SolverReport rep = gn_solve(p, sc, xi);
            xi = rep.xi;
            iters = it;
            converged = rep.final_step_m < sc.tol_m;
            const double v_r = (p.x_radar[0].normalized())
                                   .dot(p.r_radar_from_cam * (p.xi_bg[0] + xi));
            const EnergyTerms e =
                rep.energy_trace.empty() ? EnergyTerms{} : rep.energy_trace.back();
            trace.row({static_cast<double>(it), e.total(), e.flow, e.rigid, e.radar,
                       xi.x(), xi.y(), xi.z(), v_r});
            if (it <= 8) {
                std::map<int, SolverReport> cur;
                cur[1] = rep;
                GridD ex, ey, ez;
                estimated_flow_planes(fa, cur, ex, ey, ez);
                const WarpGrid wg =
                    build_warp_grid(fa.bundle.k.depth, fa.bundle.k.valid, ex, ey, ez,
                                    cfg.calib, fa.rd.params, fa.ss.alias_copies);
                const WarpField wf = warp_forward(fa.rd.power_db, wg);
                char name[64];
                std::snprintf(name, sizeof(name), "warped_iter_%02d.ppm", it);
                write_ppm_heat(t.track(join(a.out_dir, name)), wf.value, wf.valid,
                               fa.rd.noise_floor_db, fa.rd.power_db.maxCoeff());
            }
        }
        std::printf("demo: %s after %d iterations, xi = (%.3f, %.3f, %.3f) m/s\n",
                    converged ? "converged" : "stopped", iters, xi.x(), xi.y(), xi.z());
    } catch (...) {
        t.discard_all();
        throw;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"radar-camera cross-modal pipeline"};
    app.require_subcommand(1);

    CommonArgs sim_a, flow_a, warp_a, train_a, eval_a, demo_a;
    std::string weights, snr_mask = "on", loss = "l1";
    int kernel = 3, steps = 150, sequences = 10, frames = 6;
    std::string report_dir = "out";
    bool flow_no_radar = false;

    add_common(app.add_subcommand("simulate", "Render a scene and synthesize radar"),
               sim_a, true);
    auto* cflow = app.add_subcommand("flow", "Estimate per-object scene flow");
    add_common(cflow, flow_a, true);
    cflow->add_flag("--no-radar", flow_no_radar, "Drop the radar energy term");
    add_common(app.add_subcommand("warp", "Warp the RD map into the camera"), warp_a,
               true);

    auto* ctrain = app.add_subcommand("train-doa", "Train the azimuth regressor");
    add_common(ctrain, train_a, false);
    ctrain->add_option("--weights", weights, "Checkpoint output path");
    ctrain->add_option("--kernel", kernel, "Convolution kernel")->check(CLI::IsMember({1, 3}));
    ctrain->add_option("--snr-mask", snr_mask, "Train-pixel SNR gate")
        ->check(CLI::IsMember({"on", "off"}));
    ctrain->add_option("--loss", loss, "Training loss")
        ->check(CLI::IsMember({"l1", "scalespace"}));
    ctrain->add_option("--steps", steps, "Optimizer steps");
    ctrain->add_option("--sequences", sequences, "Dataset sequences");
    ctrain->add_option("--frames", frames, "Frames per sequence");

    auto* ceval = app.add_subcommand("eval", "Metrics for one scene");
    add_common(ceval, eval_a, true);
    ceval->add_option("--weights", weights, "Checkpoint for DoA prediction");

    app.add_subcommand("report", "Consolidate metric files")
        ->add_option("--out-dir", report_dir, "Directory to scan");

    add_common(app.add_subcommand("demo", "Single-target refinement walkthrough"), demo_a,
               false);

    CLI11_PARSE(app, argc, argv);

    try {
        for (const auto& args : {&sim_a, &flow_a, &warp_a, &eval_a}) {
            if (!args->scene_path.empty() && !fs::exists(args->scene_path)) {
                std::fprintf(stderr, "error: scene file not found: %s\n",
                             args->scene_path.c_str());
                return 2;
            }
        }
        if (app.got_subcommand("simulate")) return cmd_simulate(sim_a);
        if (app.got_subcommand("flow")) return cmd_flow(flow_a, !flow_no_radar);
        if (app.got_subcommand("warp")) return cmd_warp(warp_a);
        if (app.got_subcommand("train-doa"))
            return cmd_train_doa(train_a, weights, kernel, snr_mask, loss, steps,
                                 sequences, frames);
        if (app.got_subcommand("eval")) return cmd_eval(eval_a, weights);
        if (app.got_subcommand("report")) return cmd_report(report_dir);
        if (app.got_subcommand("demo")) return cmd_demo(demo_a);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
