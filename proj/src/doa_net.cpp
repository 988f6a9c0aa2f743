#include "radwarp/doa_net.hpp"

#include "radwarp/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>

namespace radwarp {

FeatureMaps build_features(const RdSpectrum& spec) {
    if (spec.u.size() < 3) throw std::invalid_argument("build_features: needs 3 channels");
    FeatureMaps f;
    f.power_db = rd_power(spec).power_db;
    const auto rows = spec.u[0].rows(), cols = spec.u[0].cols();
    f.phase21.resize(rows, cols);
    f.phase32.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            f.phase21(r, c) = std::arg(spec.u[1](r, c) * std::conj(spec.u[0](r, c)));
            f.phase32(r, c) = std::arg(spec.u[2](r, c) * std::conj(spec.u[1](r, c)));
        }
    return f;
}

std::vector<int> DoaNetConfig::channels() const {
    if (kernel != 1 && kernel != 3)
        throw std::invalid_argument("DoaNetConfig: kernel must be 1 or 3");
    return {3, 32 * t, 64 * t, 128 * t, 64 * t, 32 * t, 32 * t, 1};
}

DoaNet DoaNet::init(const DoaNetConfig& cfg, std::uint64_t seed) {
    DoaNet net;
    net.cfg = cfg;
    const auto ch = cfg.channels();
    const int kk = cfg.kernel * cfg.kernel;
    std::uint64_t counter = seed ^ 0x600d5eedull;
    for (size_t l = 0; l + 1 < ch.size(); ++l) {
        Layer layer;
        const int fan_in = ch[l] * kk;
        const double scale = std::sqrt(2.0 / fan_in);  // He init for ReLU stacks
        layer.w.resize(ch[l + 1], fan_in);
        for (Eigen::Index i = 0; i < layer.w.size(); ++i)
            layer.w.data()[i] = scale * gauss_pair(counter++)[0];
        layer.b = Eigen::VectorXd::Zero(ch[l + 1]);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

long DoaNet::parameter_count() const {
    long n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
}

double DoaNet::get_parameter(long i) const {
    for (const auto& l : layers) {
        if (i < l.w.size()) return l.w.data()[i];
        i -= l.w.size();
        if (i < l.b.size()) return l.b[i];
        i -= l.b.size();
    }
    throw std::out_of_range("get_parameter");
}

void DoaNet::set_parameter(long i, double v) {
    for (auto& l : layers) {
        if (i < l.w.size()) {
            l.w.data()[i] = v;
            return;
        }
        i -= l.w.size();
        if (i < l.b.size()) {
            l.b[i] = v;
            return;
        }
        i -= l.b.size();
    }
    throw std::out_of_range("set_parameter");
}

namespace {

// im2col for 3x3 zero-padded unit-stride convolution: input [c x n] over an
// (rows x cols) grid, output [c*9 x n]. Offset o = (ky+1)*3 + (kx+1).
Eigen::MatrixXd im2col3(const Eigen::MatrixXd& x, int rows, int cols) {
    const int c_in = static_cast<int>(x.rows());
    Eigen::MatrixXd col = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(c_in) * 9,
                                                x.cols());
    for (int ky = -1; ky <= 1; ++ky)
        for (int kx = -1; kx <= 1; ++kx) {
            const int o = (ky + 1) * 3 + (kx + 1);
            for (int r = 0; r < rows; ++r) {
                const int sr = r + ky;
                if (sr < 0 || sr >= rows) continue;
                const int c0 = std::max(0, -kx), c1 = cols - 1 - std::max(0, kx);
                if (c1 < c0) continue;
                for (int ci = 0; ci < c_in; ++ci)
                    col.block(static_cast<Eigen::Index>(ci) * 9 + o,
                              static_cast<Eigen::Index>(r) * cols + c0, 1, c1 - c0 + 1) =
                        x.block(ci, static_cast<Eigen::Index>(sr) * cols + c0 + kx, 1,
                                c1 - c0 + 1);
            }
        }
    return col;
}

Eigen::MatrixXd col2im3(const Eigen::MatrixXd& dcol, int rows, int cols, int c_in) {
    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(c_in, static_cast<Eigen::Index>(rows) * cols);
    for (int ky = -1; ky <= 1; ++ky)
        for (int kx = -1; kx <= 1; ++kx) {
            const int o = (ky + 1) * 3 + (kx + 1);
            for (int r = 0; r < rows; ++r) {
                const int sr = r + ky;
                if (sr < 0 || sr >= rows) continue;
                const int c0 = std::max(0, -kx), c1 = cols - 1 - std::max(0, kx);
                if (c1 < c0) continue;
                for (int ci = 0; ci < c_in; ++ci)
                    dx.block(ci, static_cast<Eigen::Index>(sr) * cols + c0 + kx, 1,
                             c1 - c0 + 1) +=
                        dcol.block(static_cast<Eigen::Index>(ci) * 9 + o,
                                   static_cast<Eigen::Index>(r) * cols + c0, 1, c1 - c0 + 1);
            }
        }
    return dx;
}

}  // namespace

GridD doa_forward(const DoaNet& net, const FeatureMaps& f, ForwardCache* cache) {
    const int rows = static_cast<int>(f.power_db.rows());
    const int cols = static_cast<int>(f.power_db.cols());
    const Eigen::Index n = static_cast<Eigen::Index>(rows) * cols;
    Eigen::MatrixXd x(3, n);
    x.row(0) = Eigen::Map<const Eigen::RowVectorXd>(f.power_db.data(), n);
    x.row(1) = Eigen::Map<const Eigen::RowVectorXd>(f.phase21.data(), n);
    x.row(2) = Eigen::Map<const Eigen::RowVectorXd>(f.phase32.data(), n);

    if (cache) {
        cache->rows = rows;
        cache->cols = cols;
        cache->inputs.clear();
    }
    Eigen::RowVectorXd pre;
    for (size_t l = 0; l < net.layers.size(); ++l) {
        if (cache) cache->inputs.push_back(x);
        const auto& layer = net.layers[l];
        Eigen::MatrixXd y;
        if (net.cfg.kernel == 1)
            y = layer.w * x;
        else
            y = layer.w * im2col3(x, rows, cols);
        y.colwise() += layer.b;
        if (l + 1 < net.layers.size())
            x = y.cwiseMax(0.0);
        else
            pre = y.row(0);
    }
    if (!pre.allFinite()) throw std::runtime_error("doa_forward: non-finite activation");
    if (cache) cache->pre_out = pre;

    GridD out(rows, cols);
    Eigen::Map<Eigen::RowVectorXd>(out.data(), n) =
        90.0 * pre.array().tanh().matrix();
    return out;
}

NetGradients doa_backward(const DoaNet& net, const ForwardCache& cache,
                          const GridD& cotangent) {
    const int rows = cache.rows, cols = cache.cols;
    const Eigen::Index n = static_cast<Eigen::Index>(rows) * cols;
    if (cotangent.rows() != rows || cotangent.cols() != cols)
        throw std::invalid_argument("doa_backward: cotangent dims mismatch");

    NetGradients grads;
    grads.g.resize(net.layers.size());

    const Eigen::Array<double, 1, Eigen::Dynamic> t = cache.pre_out.array().tanh();
    Eigen::MatrixXd dy(1, n);
    dy.row(0) = (Eigen::Map<const Eigen::RowVectorXd>(cotangent.data(), n).array() * 90.0 *
                 (1.0 - t * t))
                    .matrix();

    for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
        const Eigen::MatrixXd& x_in = cache.inputs[l];
        grads.g[l].b = dy.rowwise().sum();
        if (net.cfg.kernel == 1) {
            grads.g[l].w = dy * x_in.transpose();
            if (l > 0) {
                Eigen::MatrixXd dx = net.layers[l].w.transpose() * dy;
                dy = dx.cwiseProduct((x_in.array() > 0.0).cast<double>().matrix());
            }
        } else {
            const Eigen::MatrixXd col = im2col3(x_in, rows, cols);
            grads.g[l].w = dy * col.transpose();
            if (l > 0) {
                const Eigen::MatrixXd dcol = net.layers[l].w.transpose() * dy;
                Eigen::MatrixXd dx = col2im3(dcol, rows, cols, static_cast<int>(x_in.rows()));
                dy = dx.cwiseProduct((x_in.array() > 0.0).cast<double>().matrix());
            }
        }
    }
    return grads;
}

double NetGradients::dot(const NetGradients& other) const {
    double acc = 0.0;
    for (size_t i = 0; i < g.size(); ++i) {
        acc += (g[i].w.array() * other.g[i].w.array()).sum();
        acc += (g[i].b.array() * other.g[i].b.array()).sum();
    }
    return acc;
}

AdamState make_adam(const DoaNet& net) {
    AdamState s;
    for (const auto& l : net.layers) {
        DoaNet::Layer z;
        z.w = Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols());
        z.b = Eigen::VectorXd::Zero(l.b.size());
        s.m.push_back(z);
        s.v.push_back(z);
    }
    return s;
}

void adam_step(DoaNet& net, const NetGradients& grads, AdamState& st, double lr) {
    ++st.step;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (size_t l = 0; l < net.layers.size(); ++l) {
        auto upd = [&](Eigen::MatrixXd& w, const Eigen::MatrixXd& g, Eigen::MatrixXd& m,
                       Eigen::MatrixXd& v) {
            m = st.beta1 * m + (1.0 - st.beta1) * g;
            v = st.beta2 * v + (1.0 - st.beta2) * g.cwiseProduct(g);
            w.array() -=
                lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + st.eps);
        };
        upd(net.layers[l].w, grads.g[l].w, st.m[l].w, st.v[l].w);
        Eigen::MatrixXd bm = st.m[l].b, bv = st.v[l].b, bw = net.layers[l].b,
                        bg = grads.g[l].b;
        upd(bw, bg, bm, bv);
        net.layers[l].b = bw;
        st.m[l].b = bm;
        st.v[l].b = bv;
        if (!net.layers[l].w.allFinite() || !net.layers[l].b.allFinite())
            throw std::runtime_error("adam_step: non-finite parameters");
    }
}

namespace {

constexpr char kNetMagic[6] = {'R', 'W', 'N', 'E', 'T', '1'};

void put_u32f(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32f(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("RWNET1: truncated");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

}  // namespace

void save_net(const std::string& path, const DoaNet& net) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_net: cannot open " + path);
    os.write(kNetMagic, sizeof(kNetMagic));
    put_u32f(os, static_cast<std::uint32_t>(net.cfg.kernel));
    put_u32f(os, static_cast<std::uint32_t>(net.cfg.t));
    put_u32f(os, net.cfg.snr_mask_enabled ? 1 : 0);
    put_u32f(os, net.cfg.scale_space_loss ? 1 : 0);
    put_u32f(os, static_cast<std::uint32_t>(net.cfg.loss_levels));
    put_u32f(os, static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& l : net.layers) {
        put_u32f(os, static_cast<std::uint32_t>(l.w.rows()));
        put_u32f(os, static_cast<std::uint32_t>(l.w.cols()));
        os.write(reinterpret_cast<const char*>(l.w.data()),
                 static_cast<std::streamsize>(sizeof(double) * l.w.size()));
        os.write(reinterpret_cast<const char*>(l.b.data()),
                 static_cast<std::streamsize>(sizeof(double) * l.b.size()));
    }
    if (!os) throw std::runtime_error("save_net: write failed");
}

DoaNet load_net(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_net: cannot open " + path);
    char magic[6];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kNetMagic, sizeof(kNetMagic)) != 0)
        throw std::runtime_error("load_net: bad magic");
    DoaNet net;
    net.cfg.kernel = static_cast<int>(get_u32f(is));
    net.cfg.t = static_cast<int>(get_u32f(is));
    net.cfg.snr_mask_enabled = get_u32f(is) != 0;
    net.cfg.scale_space_loss = get_u32f(is) != 0;
    net.cfg.loss_levels = static_cast<int>(get_u32f(is));
    const std::uint32_t n_layers = get_u32f(is);
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        DoaNet::Layer l;
        const std::uint32_t rows = get_u32f(is), cols = get_u32f(is);
        l.w.resize(rows, cols);
        is.read(reinterpret_cast<char*>(l.w.data()),
                static_cast<std::streamsize>(sizeof(double) * l.w.size()));
        l.b.resize(rows);
        is.read(reinterpret_cast<char*>(l.b.data()),
                static_cast<std::streamsize>(sizeof(double) * l.b.size()));
        net.layers.push_back(std::move(l));
    }
    if (!is) throw std::runtime_error("load_net: truncated");
    return net;
}

GridD doa_labels(const GridD& depth, const GridB& valid, const Calibration& calib) {
    const CameraIntrinsics& k = calib.intrinsics;
    const RigidTransform radar_from_cam = calib.radar_from_cam();
    GridD out = GridD::Zero(depth.rows(), depth.cols());
    parallel_for(depth.size(), [&](std::int64_t i) {
        const int u = static_cast<int>(i % depth.cols());
        const int v = static_cast<int>(i / depth.cols());
        if (!valid(v, u) || !(depth(v, u) > 0.0)) return;
        const Vec3 x_r =
            transform_point(pixel_to_camera(Vec2(u, v), depth(v, u), k), radar_from_cam);
        out(v, u) = azimuth_deg(x_r);
    });
    return out;
}

LossResult loss_l1(const GridD& warped_pred, const GridD& labels,
                   const std::vector<int>& pixels) {
    LossResult res;
    res.cotangent = GridD::Zero(warped_pred.rows(), warped_pred.cols());
    if (pixels.empty()) return res;
    const int w = static_cast<int>(warped_pred.cols());
    const double inv_n = 1.0 / static_cast<double>(pixels.size());
    double acc = 0.0;
    for (int p : pixels) {
        const int u = p % w, v = p / w;
        const double d = warped_pred(v, u) - labels(v, u);
        acc += std::abs(d);
        res.cotangent(v, u) = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
    }
    res.loss = acc * inv_n;
    return res;
}

GridD pool_power_weighted(const GridD& values, const GridD& power_lin, int half) {
    if (half == 0) return values;
    GridD out(values.rows(), values.cols());
    const int rows = static_cast<int>(values.rows()), cols = static_cast<int>(values.cols());
    parallel_for(static_cast<std::int64_t>(rows) * cols, [&](std::int64_t i) {
        const int r = static_cast<int>(i / cols), c = static_cast<int>(i % cols);
        double num = 0.0, den = 0.0, plain = 0.0;
        int count = 0;
        for (int dr = -half; dr <= half; ++dr)
            for (int dc = -half; dc <= half; ++dc) {
                const int rr = r + dr, cc = c + dc;
                if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
                num += power_lin(rr, cc) * values(rr, cc);
                den += power_lin(rr, cc);
                plain += values(rr, cc);
                ++count;
            }
        out(r, c) = den > 1e-300 ? num / den : plain / count;
    });
    return out;
}

GridD pool_power_weighted_adjoint(const GridD& cotangent, const GridD& power_lin,
                                  int half) {
    if (half == 0) return cotangent;
    const int rows = static_cast<int>(cotangent.rows());
    const int cols = static_cast<int>(cotangent.cols());
    // Precompute per-center denominators, then gather: the adjoint swaps the
    // roles of center and neighbor.
    GridD den(rows, cols);
    GridI cnt(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            double d = 0.0;
            int n = 0;
            for (int dr = -half; dr <= half; ++dr)
                for (int dc = -half; dc <= half; ++dc) {
                    const int rr = r + dr, cc = c + dc;
                    if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
                    d += power_lin(rr, cc);
                    ++n;
                }
            den(r, c) = d;
            cnt(r, c) = n;
        }
    GridD grad = GridD::Zero(rows, cols);
    parallel_for(static_cast<std::int64_t>(rows) * cols, [&](std::int64_t i) {
        const int r = static_cast<int>(i / cols), c = static_cast<int>(i % cols);
        double acc = 0.0;
        for (int dr = -half; dr <= half; ++dr)
            for (int dc = -half; dc <= half; ++dc) {
                const int rr = r + dr, cc = c + dc;  // center whose window holds (r, c)
                if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
                if (den(rr, cc) > 1e-300)
                    acc += cotangent(rr, cc) * power_lin(r, c) / den(rr, cc);
                else
                    acc += cotangent(rr, cc) / cnt(rr, cc);
            }
        grad(r, c) = acc;
    });
    return grad;
}

SampleLoss sample_loss(const GridD& pred_rd, const DoaSample& sample, bool snr_mask,
                       bool scale_space, int loss_levels) {
    const std::vector<int>& pixels = snr_mask ? sample.train_on : sample.train_off;
    SampleLoss out;
    out.grad_rd = GridD::Zero(pred_rd.rows(), pred_rd.cols());
    if (pixels.empty()) {
        std::fprintf(stderr, "sample_loss: empty training pixel set, step skipped\n");
        out.skipped = true;
        return out;
    }
    if (!scale_space) {
        const WarpField wf = warp_forward(pred_rd, sample.wg);
        const LossResult l = loss_l1(wf.value, sample.labels_cam, pixels);
        out.loss = l.loss;
        out.grad_rd = warp_backward(l.cotangent, sample.wg, sample.wg.n_doppler);
        return out;
    }
    for (int s = 1; s <= loss_levels; ++s) {
        const int half = (1 << (s - 1)) - 1;  // window width 2^s - 1
        const GridD pooled = pool_power_weighted(pred_rd, sample.power_lin, half);
        const WarpField wf = warp_forward(pooled, sample.wg);
        const LossResult l = loss_l1(wf.value, sample.labels_cam, pixels);
        const double lw = 1.0 / static_cast<double>(s);
        out.loss += lw * l.loss;
        GridD g = warp_backward(l.cotangent, sample.wg, sample.wg.n_doppler);
        out.grad_rd += lw * pool_power_weighted_adjoint(g, sample.power_lin, half);
    }
    return out;
}

TrainTrace train_doa(DoaNet& net, const SampleProvider& provider, int n_train, int n_val,
                     const TrainConfig& cfg) {
    if (n_train < 1) throw std::invalid_argument("train_doa: empty training set");
    TrainTrace trace;
    AdamState adam = make_adam(net);
    std::unique_ptr<CsvWriter> csv;
    if (!cfg.metrics_csv.empty())
        csv = std::make_unique<CsvWriter>(cfg.metrics_csv,
                                          std::vector<std::string>{"step", "train_loss",
                                                                   "val_mae"});

    auto validate = [&]() {
        double acc = 0.0;
        int used = 0;
        for (int i = 0; i < n_val; ++i) {
            const DoaSample s = provider(n_train + i);
            const GridD pred = doa_forward(net, s.features);
            const SampleLoss l =
                sample_loss(pred, s, cfg.snr_mask, cfg.scale_space, cfg.loss_levels);
            if (!l.skipped) {
                acc += l.loss;
                ++used;
            }
        }
        return used > 0 ? acc / used : 0.0;
    };

    std::vector<int> order(n_train);
    for (int i = 0; i < n_train; ++i) order[i] = i;
    auto reshuffle = [&](int epoch) {
        for (int i = n_train - 1; i > 0; --i) {
            const auto j = static_cast<int>(
                mix64(cfg.seed ^ (static_cast<std::uint64_t>(epoch) << 32) ^
                      static_cast<std::uint64_t>(i)) %
                static_cast<std::uint64_t>(i + 1));
            std::swap(order[i], order[j]);
        }
    };

    std::vector<DoaNet::Layer> best = net.layers;
    double best_val = std::numeric_limits<double>::infinity();
    int best_step = 0;
    double initial_loss = -1.0;
    int stale = 0;

    for (int step = 1; step <= cfg.max_steps; ++step) {
        const int epoch = (step - 1) / n_train;
        const int pos = (step - 1) % n_train;
        if (pos == 0) reshuffle(epoch);

        const DoaSample s = provider(order[pos]);
        ForwardCache cache;
        const GridD pred = doa_forward(net, s.features, &cache);
        const SampleLoss l =
            sample_loss(pred, s, cfg.snr_mask, cfg.scale_space, cfg.loss_levels);
        if (l.skipped) continue;
        if (initial_loss < 0.0) initial_loss = std::max(l.loss, 1e-12);
        if (l.loss > cfg.divergence_factor * initial_loss)
            throw std::runtime_error("train_doa: loss diverged");
        trace.train_loss.push_back(l.loss);

        const NetGradients grads = doa_backward(net, cache, l.grad_rd);
        adam_step(net, grads, adam, cfg.lr);

        if (step % cfg.val_every == 0 || step == cfg.max_steps) {
            const double vmae = validate();
            trace.val_mae.emplace_back(step, vmae);
            if (csv) csv->row({static_cast<double>(step), l.loss, vmae});
            if (n_val > 0 && vmae < best_val - 1e-12) {
                best_val = vmae;
                best_step = step;
                best = net.layers;
                stale = 0;
            } else if (n_val > 0 && ++stale >= cfg.patience) {
                break;
            }
        } else if (csv) {
            csv->row({static_cast<double>(step), l.loss,
                      std::numeric_limits<double>::quiet_NaN()});
        }
    }
    if (n_val > 0 && best_step > 0) {
        net.layers = best;
        trace.best_step = best_step;
        trace.best_val_mae = best_val;
    } else if (!trace.val_mae.empty()) {
        trace.best_step = trace.val_mae.back().first;
        trace.best_val_mae = trace.val_mae.back().second;
    }
    return trace;
}

}  // namespace radwarp
