#include "radwarp/eval.hpp"

#include "radwarp/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace radwarp {

SceneFlowMetrics mae_sceneflow(const GridD& gt_x, const GridD& gt_y, const GridD& gt_z,
                               const GridD& est_x, const GridD& est_y, const GridD& est_z,
                               const std::vector<int>& pixels, double threshold) {
    if (pixels.empty()) throw std::invalid_argument("mae_sceneflow: empty pixel set");
    if (gt_x.rows() != est_x.rows() || gt_x.cols() != est_x.cols())
        throw std::invalid_argument("mae_sceneflow: shape mismatch");
    SceneFlowMetrics m;
    double acc = 0.0;
    long over = 0;
    for (int p : pixels) {
        const int u = p % static_cast<int>(gt_x.cols());
        const int v = p / static_cast<int>(gt_x.cols());
        const Vec3 e(est_x(v, u) - gt_x(v, u), est_y(v, u) - gt_y(v, u),
                     est_z(v, u) - gt_z(v, u));
        const double n = e.norm();
        acc += n;
        if (n > threshold) ++over;
    }
    m.count = static_cast<long>(pixels.size());
    m.mae = acc / m.count;
    m.error_rate = static_cast<double>(over) / m.count;
    return m;
}

int DoaBucketConfig::n_az() const {
    return std::max(1, static_cast<int>(std::ceil((az_max - az_min) / az_width - 1e-12)));
}

int DoaBucketConfig::n_snr() const {
    return std::max(1, static_cast<int>(std::ceil((snr_max - snr_min) / snr_width - 1e-12)));
}

DoaMetrics DoaMetrics::zero(const DoaBucketConfig& cfg) {
    DoaMetrics m;
    m.cfg = cfg;
    m.bucket_abs = GridD::Zero(cfg.n_az(), cfg.n_snr());
    m.bucket_count.setZero(cfg.n_az(), cfg.n_snr());
    return m;
}

double DoaMetrics::mae() const { return count > 0 ? abs_sum / count : 0.0; }

GridD DoaMetrics::bucket_mae() const {
    GridD out = GridD::Zero(bucket_abs.rows(), bucket_abs.cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r)
        for (Eigen::Index c = 0; c < out.cols(); ++c)
            if (bucket_count(r, c) > 0) out(r, c) = bucket_abs(r, c) / bucket_count(r, c);
    return out;
}

void DoaMetrics::merge(const DoaMetrics& other) {
    if (bucket_abs.rows() != other.bucket_abs.rows() ||
        bucket_abs.cols() != other.bucket_abs.cols())
        throw std::invalid_argument("DoaMetrics::merge: bucket shape mismatch");
    abs_sum += other.abs_sum;
    count += other.count;
    bucket_abs += other.bucket_abs;
    bucket_count += other.bucket_count;
}

namespace {

int clamp_bucket(double v, double lo, double width, int n) {
    const int i = static_cast<int>(std::floor((v - lo) / width));
    return std::clamp(i, 0, n - 1);
}

}  // namespace

DoaMetrics mae_doa(const GridD& pred_deg, const GridD& ref_deg_cam,
                   const std::vector<std::vector<std::int32_t>>& bin_pixels,
                   const GridD& snr_db, const DoaBucketConfig& cfg) {
    if (static_cast<Eigen::Index>(bin_pixels.size()) != pred_deg.size())
        throw std::invalid_argument("mae_doa: bin set count must match pred grid size");
    if (pred_deg.rows() != snr_db.rows() || pred_deg.cols() != snr_db.cols())
        throw std::invalid_argument("mae_doa: snr grid shape mismatch");
    DoaMetrics m = DoaMetrics::zero(cfg);
    const int cam_w = static_cast<int>(ref_deg_cam.cols());
    const int cols = static_cast<int>(pred_deg.cols());
    for (size_t bin = 0; bin < bin_pixels.size(); ++bin) {
        const auto& px = bin_pixels[bin];
        if (px.empty()) continue;
        const int br = static_cast<int>(bin) / cols, bc = static_cast<int>(bin) % cols;
        const double pred = pred_deg(br, bc);
        double best = std::numeric_limits<double>::infinity();
        double best_ref = 0.0;
        for (std::int32_t p : px) {
            const double ref = ref_deg_cam(p / cam_w, p % cam_w);
            const double e = std::abs(ref - pred);
            if (e < best) {
                best = e;
                best_ref = ref;
            }
        }
        m.abs_sum += best;
        ++m.count;
        const int ia = clamp_bucket(best_ref, cfg.az_min, cfg.az_width, cfg.n_az());
        const int is = clamp_bucket(snr_db(br, bc), cfg.snr_min, cfg.snr_width, cfg.n_snr());
        m.bucket_abs(ia, is) += best;
        ++m.bucket_count(ia, is);
    }
    return m;
}

double mti_accuracy(const std::vector<double>& pred_probability,
                    const std::vector<int>& reference_moving, double threshold) {
    if (pred_probability.empty() || pred_probability.size() != reference_moving.size())
        throw std::invalid_argument("mti_accuracy: empty or mismatched inputs");
    long correct = 0;
    for (size_t i = 0; i < pred_probability.size(); ++i) {
        const bool pred_moving = pred_probability[i] < threshold;
        if (pred_moving == (reference_moving[i] != 0)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(pred_probability.size());
}

std::vector<int> discard_stationary_scenes(const std::vector<double>& ego_speeds,
                                           double min_speed) {
    std::vector<int> keep;
    for (size_t i = 0; i < ego_speeds.size(); ++i)
        if (ego_speeds[i] >= min_speed) keep.push_back(static_cast<int>(i));
    if (keep.empty() && !ego_speeds.empty())
        std::fprintf(stderr, "discard_stationary_scenes: no frame reaches %.2f m/s\n",
                     min_speed);
    return keep;
}

void write_metric_report(const std::string& csv_path, const MetricReport& report) {
    CsvWriter csv(csv_path, {"metric", "az_bucket_deg", "snr_bucket_db", "value", "count"});
    auto row = [&](const std::string& name, double az, double snr, double value,
                   long count) {
        csv.row_mixed({name, format_double(az), format_double(snr), format_double(value),
                       std::to_string(count)});
    };
    if (report.has_sf) {
        row("mae_sf", 0, 0, report.sf.mae, report.sf.count);
        row("sf_error_rate", 0, 0, report.sf.error_rate, report.sf.count);
    }
    if (report.has_doa) {
        row("mae_doa", 0, 0, report.doa.mae(), report.doa.count);
        const GridD bm = report.doa.bucket_mae();
        const auto& cfg = report.doa.cfg;
        for (Eigen::Index a = 0; a < bm.rows(); ++a)
            for (Eigen::Index s = 0; s < bm.cols(); ++s)
                if (report.doa.bucket_count(a, s) > 0)
                    row("mae_doa_bucket", cfg.az_min + cfg.az_width * (a + 0.5),
                        cfg.snr_min + cfg.snr_width * (s + 0.5), bm(a, s),
                        report.doa.bucket_count(a, s));
    }
    if (report.has_mti) row("mti_accuracy", 0, 0, report.mti_acc, report.mti_count);
}

void write_doa_bucket_heatmap(const std::string& pgm_path, const DoaMetrics& m) {
    write_pgm(pgm_path, m.bucket_mae(), 0.0, 0.0);  // lo >= hi: auto-scale
}

}  // namespace radwarp
