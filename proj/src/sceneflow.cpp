#include "radwarp/sceneflow.hpp"

#include <cmath>
#include <stdexcept>

namespace radwarp {

Charbonnier charbonnier(double r, double eps, double alpha) {
    const double q = r * r + eps;
    return {std::pow(q, alpha), alpha * std::pow(q, alpha - 1.0)};
}

RadarResidual residual_radar(const ObjectProblem& p, const Vec3& xi, size_t i, int s) {
    RadarResidual out;
    const Vec3& x_r = p.x_radar[i];
    const double range = x_r.norm();
    if (range < 1e-9 || p.ss == nullptr) return out;
    const Eigen::RowVector3d dir = x_r.transpose() / range;
    const Vec3 xi_total = p.xi_bg[i] + xi;
    const double v_r = dir * (p.r_radar_from_cam * xi_total);
    const ScaleSample smp = sample_scalespace(*p.ss, s, range, v_r);
    if (!smp.in_grid) return out;
    out.in_grid = true;
    out.r = smp.power_db - p.rd_target_db;
    out.j = smp.grad_db_per_mps * dir * p.r_radar_from_cam;
    return out;
}

FlowResidual residual_flow(const ObjectProblem& p, const Vec3& xi, size_t i) {
    FlowResidual out;
    if (!p.has_flow[i]) return out;
    const Vec3 x_pred = p.x_cam_k[i] + p.dt * (p.xi_bg[i] + xi);
    if (x_pred.z() <= 1e-6) return out;
    const Vec2 u_pred = camera_to_pixel(x_pred, p.intr);
    out.r = u_pred - (p.pix[i] + p.flow_meas[i]);
    const double z = x_pred.z();
    Eigen::Matrix<double, 2, 3> dproj;
    dproj << p.intr.fx / z, 0.0, -p.intr.fx * x_pred.x() / (z * z),
             0.0, p.intr.fy / z, -p.intr.fy * x_pred.y() / (z * z);
    out.j = dproj * p.dt;
    out.ok = true;
    return out;
}

RigidResidual residual_rigid(const ObjectProblem& p, const Vec3& xi, size_t i) {
    RigidResidual out;
    if (!p.has_rigid[i]) return out;
    out.r = p.x_cam_k[i] + p.dt * (p.xi_bg[i] + xi) - p.x_cam_k1[i];
    out.ok = true;
    return out;
}

namespace {

struct Accum {
    Mat3 h = Mat3::Zero();
    Vec3 b = Vec3::Zero();
    EnergyTerms energy;
    long rows = 0;
};

void accumulate(const ObjectProblem& p, const SolverConfig& cfg, const Vec3& xi,
                Accum& acc) {
    const EnergyWeights& w = cfg.weights;
    const int scales = p.ss ? std::min(cfg.radar_scales, p.ss->levels()) : 0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (w.lambda_flow > 0.0) {
            const FlowResidual f = residual_flow(p, xi, i);
            if (f.ok) {
                for (int k = 0; k < 2; ++k) {
                    const auto ch = charbonnier(f.r[k], w.charbonnier_eps, w.charbonnier_alpha);
                    const double wk = w.lambda_flow * ch.weight;
                    acc.h.noalias() += wk * f.j.row(k).transpose() * f.j.row(k);
                    acc.b.noalias() += wk * f.r[k] * f.j.row(k).transpose();
                    acc.energy.flow += w.lambda_flow * ch.rho;
                    ++acc.rows;
                }
            }
        }
        if (w.lambda_rigid > 0.0) {
            const RigidResidual g = residual_rigid(p, xi, i);
            if (g.ok) {
                for (int k = 0; k < 3; ++k) {
                    const auto ch = charbonnier(g.r[k], w.charbonnier_eps, w.charbonnier_alpha);
                    const double wk = w.lambda_rigid * ch.weight;
                    // J row is dt * e_k.
                    acc.h(k, k) += wk * p.dt * p.dt;
                    acc.b[k] += wk * p.dt * g.r[k];
                    acc.energy.rigid += w.lambda_rigid * ch.rho;
                    ++acc.rows;
                }
            }
        }
        if (w.lambda_radar > 0.0 && scales > 0) {
            for (int s = 1; s <= scales; ++s) {
                const RadarResidual rr = residual_radar(p, xi, i, s);
                if (!rr.in_grid) continue;
                const double lam = w.lambda_radar / static_cast<double>(1 << (s - 1));
                const auto ch = charbonnier(rr.r, w.charbonnier_eps, w.charbonnier_alpha);
                const double wk = lam * ch.weight;
                acc.h.noalias() += wk * rr.j.transpose() * rr.j;
                acc.b.noalias() += wk * rr.r * rr.j.transpose();
                acc.energy.radar += lam * ch.rho;
                ++acc.rows;
            }
        }
    }
}

}  // namespace

double total_energy(const ObjectProblem& p, const SolverConfig& cfg, const Vec3& xi) {
    Accum acc;
    accumulate(p, cfg, xi, acc);
    return acc.energy.total();
}

SolverReport gn_solve(const ObjectProblem& p, const SolverConfig& cfg, const Vec3& init_xi) {
    if (p.size() == 0) throw std::invalid_argument("gn_solve: empty pixel set");
    SolverReport rep;
    rep.xi = init_xi;
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        Accum acc;
        accumulate(p, cfg, rep.xi, acc);
        if (iter == 1 && acc.rows < 3)
            throw std::invalid_argument("gn_solve: fewer than 3 residual rows");
        rep.energy_trace.push_back(acc.energy);
        rep.iterations = iter;

        Vec3 step = -acc.h.ldlt().solve(acc.b);
        if (!step.allFinite() || (acc.h * step + acc.b).norm() > 1e-6 * (1.0 + acc.b.norm())) {
            // Singular normal matrix (for example a radar-only rank-1 system):
            // damp and take the regularized step.
            rep.damped = true;
            step = -(acc.h + 1e-9 * Mat3::Identity()).ldlt().solve(acc.b);
            if (!step.allFinite()) throw std::runtime_error("gn_solve: non-finite step");
        }
        // Backtracking keeps the iteration from hopping across sharp RD peaks.
        double scale = 1.0;
        for (int t = 0; t < 7; ++t, scale *= 0.5)
            if (total_energy(p, cfg, rep.xi + scale * step) < acc.energy.total()) break;
        step *= scale;
        rep.xi += step;
        rep.final_step_norm = step.norm();
        rep.final_step_m = step.norm() * p.dt;
        if (rep.final_step_m < cfg.tol_m) {
            rep.converged = true;
            break;
        }
    }
    return rep;
}

}  // namespace radwarp
