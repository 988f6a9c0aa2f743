#pragma once

#include "radwarp/scalespace.hpp"

#include <vector>

namespace radwarp {

struct EnergyWeights {
    double lambda_flow = 1.0;
    double lambda_rigid = 1.0;
    double lambda_radar = 0.2;  // level-1 weight, halved per scale level
    double charbonnier_eps = 1e-6;
    double charbonnier_alpha = 0.45;
};

struct Charbonnier {
    double rho;
    double weight;
};

/// Robust penalty rho = (r^2 + eps)^alpha and the printed adaptive weight
/// alpha * (r^2 + eps)^(alpha - 1); the caller multiplies by lambda.
Charbonnier charbonnier(double r, double eps = 1e-6, double alpha = 0.45);

/// One rigid instance: measurements over its gated pixel set P_i. The solver
/// estimates the 3 translational DoF of the foreground flow xi (camera
/// frame, m/s) on top of the per-pixel background flow.
struct ObjectProblem {
    int instance_id = -1;
    std::vector<Vec2> pix;
    std::vector<Vec3> x_cam_k;      // lifted points at k
    std::vector<Vec3> xi_bg;        // background flow per pixel, m/s
    std::vector<Vec2> flow_meas;    // measured optical flow, px
    std::vector<char> has_flow;
    std::vector<Vec3> x_cam_k1;     // measured next-frame points
    std::vector<char> has_rigid;
    std::vector<Vec3> x_radar;      // radar-frame positions at k
    const RdScaleSpace* ss = nullptr;
    Mat3 r_radar_from_cam = Mat3::Identity();
    CameraIntrinsics intr;
    double dt = 0.1;
    double rd_target_db = 0.0;  // global max of the level-1 map

    size_t size() const { return pix.size(); }
};

struct RadarResidual {
    double r = 0.0;                                        // dB
    Eigen::RowVector3d j = Eigen::RowVector3d::Zero();     // d r / d xi
    bool in_grid = false;
};

/// Radar energy residual at one pixel and scale level: the sampled RD power
/// at (|x_R|, v_r(xi_total)) minus the map maximum, with the chain-rule row
/// (dRD/dv) * x_R^T/|x_R| * R_radar_from_cam.
RadarResidual residual_radar(const ObjectProblem& p, const Vec3& xi, size_t i, int s);

struct FlowResidual {
    Vec2 r = Vec2::Zero();  // px
    Eigen::Matrix<double, 2, 3> j = Eigen::Matrix<double, 2, 3>::Zero();
    bool ok = false;
};

/// Reprojection-vs-measured-flow residual with the pinhole Jacobian times dt.
FlowResidual residual_flow(const ObjectProblem& p, const Vec3& xi, size_t i);

struct RigidResidual {
    Vec3 r = Vec3::Zero();  // m
    // Jacobian is the constant dt * I.
    bool ok = false;
};

RigidResidual residual_rigid(const ObjectProblem& p, const Vec3& xi, size_t i);

struct SolverConfig {
    EnergyWeights weights;
    int max_iters = 100;
    double tol_m = 1e-4;    // stop when ||delta xi * dt|| drops below this
    int radar_scales = 3;   // capped at the pyramid depth
};

struct EnergyTerms {
    double flow = 0.0, rigid = 0.0, radar = 0.0;
    double total() const { return flow + rigid + radar; }
};

struct SolverReport {
    int iterations = 0;
    bool converged = false;
    double final_step_norm = 0.0;  // ||delta xi||, m/s
    double final_step_m = 0.0;     // ||delta xi * dt||, m per frame
    Vec3 xi = Vec3::Zero();
    std::vector<EnergyTerms> energy_trace;  // weighted robust energy per iteration
    bool damped = false;                    // Tikhonov fallback was used
};

/// Gauss-Newton / IRLS over all residual rows:
/// delta = -(sum J^T W J)^{-1} sum J^T W r with W = lambda * charbonnier weight.
/// Steps are backtracked (halving, 7 trials) until the robust energy drops;
/// if nothing helps the smallest trial step is taken anyway.
SolverReport gn_solve(const ObjectProblem& p, const SolverConfig& cfg,
                      const Vec3& init_xi = Vec3::Zero());

/// Weighted robust energy at a fixed xi (the quantity GN descends).
double total_energy(const ObjectProblem& p, const SolverConfig& cfg, const Vec3& xi);

}  // namespace radwarp
