#pragma once

#include "radwarp/radar_sim.hpp"
#include "radwarp/warp.hpp"

#include <functional>
#include <string>
#include <vector>

namespace radwarp {

/// Input feature stack over the RD grid: non-coherent power (dB) and the two
/// adjacent-channel phase differences (radians, in (-pi, pi]).
struct FeatureMaps {
    GridD power_db;
    GridD phase21;
    GridD phase32;
};

FeatureMaps build_features(const RdSpectrum& spec);

struct DoaNetConfig {
    int kernel = 3;  // 1 or 3
    int t = 1;       // channel-plan multiplier
    bool snr_mask_enabled = true;
    bool scale_space_loss = false;
    int loss_levels = 3;

    std::vector<int> channels() const;  // {3, 32t, 64t, 128t, 64t, 32t, 32t, 1}
};

/// Per-bin azimuth regressor: unit-stride convolutions with ReLU between
/// layers and a 90*tanh output scaling, hand-differentiated throughout.
struct DoaNet {
    DoaNetConfig cfg;
    struct Layer {
        Eigen::MatrixXd w;  // [c_out x c_in*k*k]
        Eigen::VectorXd b;  // [c_out]
    };
    std::vector<Layer> layers;

    static DoaNet init(const DoaNetConfig& cfg, std::uint64_t seed);
    long parameter_count() const;
    /// Flat parameter view for gradient probing: layer-major, weights then bias.
    double get_parameter(long i) const;
    void set_parameter(long i, double v);
};

struct ForwardCache {
    int rows = 0, cols = 0;
    std::vector<Eigen::MatrixXd> inputs;  // per-layer input activations [c x n]
    Eigen::RowVectorXd pre_out;           // pre-tanh logits
};

/// Prediction over the whole grid, degrees in (-90, 90). Throws on
/// non-finite activations. Pass a cache to enable backward().
GridD doa_forward(const DoaNet& net, const FeatureMaps& f, ForwardCache* cache = nullptr);

struct NetGradients {
    std::vector<DoaNet::Layer> g;  // same shapes as the layers
    double dot(const NetGradients& other) const;
};

NetGradients doa_backward(const DoaNet& net, const ForwardCache& cache,
                          const GridD& cotangent);

struct AdamState {
    std::vector<DoaNet::Layer> m, v;
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

AdamState make_adam(const DoaNet& net);
void adam_step(DoaNet& net, const NetGradients& grads, AdamState& state, double lr);

/// RWNET1 checkpoint: magic, config words, then per-layer dims + f64 data.
void save_net(const std::string& path, const DoaNet& net);
DoaNet load_net(const std::string& path);

/// Per-pixel azimuth reference (degrees) of the lifted radar-frame point.
/// Invalid pixels hold 0 and must be gated by the caller's pixel sets.
GridD doa_labels(const GridD& depth, const GridB& valid, const Calibration& calib);

struct LossResult {
    double loss = 0.0;
    GridD cotangent;  // over the camera raster
};

/// Mean absolute error over the given camera pixels; cotangent is
/// sign/|pixels| there and zero elsewhere. No angle wrapping.
LossResult loss_l1(const GridD& warped_pred, const GridD& labels,
                   const std::vector<int>& pixels);

/// RD-power-weighted average pooling with a centered (2*half+1)-wide square
/// window, stride 1. weights are linear powers; zero-weight windows average
/// plainly.
GridD pool_power_weighted(const GridD& values, const GridD& power_lin, int half);

/// Adjoint of pool_power_weighted in its `values` argument.
GridD pool_power_weighted_adjoint(const GridD& cotangent, const GridD& power_lin,
                                  int half);

/// One self-contained training example. Feature/label pairs are cheap to
/// regenerate, so datasets hold factories rather than samples.
struct DoaSample {
    FeatureMaps features;
    GridD power_lin;  // linear RD power for the scale-space loss
    WarpGrid wg;
    GridD labels_cam;            // degrees
    std::vector<int> train_on;   // SNR-gated pixel set
    std::vector<int> train_off;  // ungated radar-FoV pixel set
};

/// Loss + RD-grid cotangent for one sample under the configured loss.
struct SampleLoss {
    double loss = 0.0;
    bool skipped = false;  // empty pixel set
    GridD grad_rd;         // canonical grid
};

SampleLoss sample_loss(const GridD& pred_rd, const DoaSample& sample, bool snr_mask,
                       bool scale_space, int loss_levels);

struct TrainConfig {
    double lr = 1e-3;
    int max_steps = 200;
    int val_every = 20;
    int patience = 4;  // validations without improvement before stopping
    std::uint64_t seed = 1;
    bool snr_mask = true;
    bool scale_space = false;
    int loss_levels = 3;
    double divergence_factor = 10.0;
    std::string metrics_csv;  // optional (step, train_loss, val_mae) stream
};

struct TrainTrace {
    std::vector<double> train_loss;
    std::vector<std::pair<int, double>> val_mae;  // (step, mae)
    int best_step = 0;
    double best_val_mae = 0.0;
};

using SampleProvider = std::function<DoaSample(int)>;

/// SGD over shuffled sample indices with Adam updates and early stopping on
/// the validation MAE; the best-validation weights win. Deterministic for a
/// fixed seed. Throws if the loss diverges past divergence_factor x initial.
TrainTrace train_doa(DoaNet& net, const SampleProvider& provider, int n_train, int n_val,
                     const TrainConfig& cfg);

}  // namespace radwarp
