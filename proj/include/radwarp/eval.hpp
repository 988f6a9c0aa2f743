#pragma once

#include "radwarp/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace radwarp {

/// Euclidean-norm statistics of a 3D flow-field error over a pixel set.
struct SceneFlowMetrics {
    double mae = 0.0;         // mean per-pixel error norm, m/s
    double error_rate = 0.0;  // fraction of pixels with error norm > threshold
    long count = 0;
};

/// Per-pixel flow vectors are given as three same-shaped planes; `pixels`
/// holds flat indices v*width+u. Throws on an empty set.
SceneFlowMetrics mae_sceneflow(const GridD& gt_x, const GridD& gt_y, const GridD& gt_z,
                               const GridD& est_x, const GridD& est_y, const GridD& est_z,
                               const std::vector<int>& pixels, double threshold = 0.25);

struct DoaBucketConfig {
    double az_min = -90.0, az_max = 90.0, az_width = 5.0;  // degrees
    double snr_min = 0.0, snr_max = 40.0, snr_width = 2.5;  // dB
    int n_az() const;
    int n_snr() const;
};

/// Azimuth-error accumulator, overall and in (azimuth, SNR) buckets.
/// Out-of-range coordinates clamp to the edge buckets so marginal counts
/// always sum to the total. Sums are kept raw so frames can be merged.
struct DoaMetrics {
    DoaBucketConfig cfg;
    double abs_sum = 0.0;
    long count = 0;
    GridD bucket_abs;  // [n_az x n_snr] summed absolute errors
    Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> bucket_count;

    static DoaMetrics zero(const DoaBucketConfig& cfg);
    double mae() const;
    GridD bucket_mae() const;  // 0 where a bucket is empty
    void merge(const DoaMetrics& other);
};

/// Best-match azimuth error per RD bin: for every canonical bin with a
/// non-empty pixel set, error = min over the set of |ref(p) - pred(bin)|.
/// Buckets use the matched pixel's reference azimuth and the bin's SNR.
DoaMetrics mae_doa(const GridD& pred_deg, const GridD& ref_deg_cam,
                   const std::vector<std::vector<std::int32_t>>& bin_pixels,
                   const GridD& snr_db, const DoaBucketConfig& cfg = {});

/// Fraction of correct moving/static decisions. A pixel is predicted moving
/// when its static-hypothesis probability falls below the threshold.
/// reference_moving entries are 0 (static) or nonzero (moving). Throws on
/// empty input.
double mti_accuracy(const std::vector<double>& pred_probability,
                    const std::vector<int>& reference_moving, double threshold = 0.5);

/// Indices of frames whose ego speed reaches min_speed; slow frames are
/// dropped from angle evaluation. Warns on stderr when nothing survives.
std::vector<int> discard_stationary_scenes(const std::vector<double>& ego_speeds,
                                           double min_speed = 2.0);

struct MetricReport {
    bool has_sf = false;
    SceneFlowMetrics sf;
    bool has_doa = false;
    DoaMetrics doa;
    bool has_mti = false;
    double mti_acc = 0.0;
    long mti_count = 0;
};

/// One row per metric plus one row per non-empty DoA bucket.
void write_metric_report(const std::string& csv_path, const MetricReport& report);

/// PGM heatmap of the bucketed MAE (azimuth rows, SNR columns).
void write_doa_bucket_heatmap(const std::string& pgm_path, const DoaMetrics& m);

}  // namespace radwarp
