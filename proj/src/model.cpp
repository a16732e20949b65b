#include "lpattack/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "lpattack/util.hpp"

namespace lpa {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

double softmax_ce(std::span<const double> logits, int label, std::vector<double>& probs) {
    const double m = *std::max_element(logits.begin(), logits.end());
    probs.resize(logits.size());
    double z = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        probs[k] = std::exp(logits[k] - m);
        z += probs[k];
    }
    for (double& p : probs) p /= z;
    return std::log(z) + m - logits[static_cast<std::size_t>(label)];
}

void check_input(const GradientOracle& model, std::span<const double> x, int label) {
    if (x.size() != model.input_size())
        throw std::invalid_argument("input has " + std::to_string(x.size()) +
                                    " values, model expects " +
                                    std::to_string(model.input_size()));
    if (label < 0 || label >= model.num_classes())
        throw ValueOutOfRange("label " + std::to_string(label) + " outside the class range");
}

double glorot_limit(int fan_in, int fan_out) {
    return std::sqrt(6.0 / (fan_in + fan_out));
}

}  // namespace

// ---------------------------------------------------------------------------
// GradientOracle helpers

std::vector<double> GradientOracle::predict_probs(std::span<const double> x) const {
    const auto z = logits(x);
    std::vector<double> probs;
    softmax_ce(z, 0, probs);
    return probs;
}

std::vector<double> GradientOracle::predict_probs(const Image& image) const {
    return predict_probs(std::span<const double>(image.data));
}

int GradientOracle::predict_class(std::span<const double> x) const {
    const auto z = logits(x);
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

int GradientOracle::predict_class(const Image& image) const {
    return predict_class(std::span<const double>(image.data));
}

double GradientOracle::loss(std::span<const double> x, int label) const {
    check_input(*this, x, label);
    const auto z = logits(x);
    std::vector<double> probs;
    return softmax_ce(z, label, probs);
}

std::vector<double> GradientOracle::input_gradient(const Image& image, int label) const {
    std::vector<double> grad(input_size());
    loss_and_input_gradient(image.data, label, grad);
    return grad;
}

// ---------------------------------------------------------------------------
// MLP

void MlpConfig::validate() const {
    if (height <= 0 || width <= 0 || channels <= 0)
        throw std::invalid_argument("mlp input shape must be positive");
    if (num_classes < 2) throw std::invalid_argument("mlp needs at least two classes");
    for (int h : hidden)
        if (h <= 0) throw std::invalid_argument("hidden widths must be positive");
}

MlpModel::MlpModel(MlpConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    int in = static_cast<int>(config_.height) * config_.width * config_.channels;
    std::size_t offset = 0;
    auto push_layer = [&](int out) {
        layers_.push_back({offset, offset + static_cast<std::size_t>(out) * in, in, out});
        offset += static_cast<std::size_t>(out) * in + out;
        in = out;
    };
    for (int h : config_.hidden) push_layer(h);
    push_layer(config_.num_classes);
    params_.assign(offset, 0.0);

    std::mt19937_64 rng(mix_seed(seed, 0x696e6974));  // "init"
    for (const Layer& layer : layers_) {
        const double limit = glorot_limit(layer.in, layer.out);
        for (std::size_t i = 0; i < static_cast<std::size_t>(layer.out) * layer.in; ++i)
            params_[layer.w_offset + i] = rng_uniform(rng, -limit, limit);
        // biases start at zero
    }
}

double MlpModel::forward(std::span<const double> x, int label,
                         std::vector<std::vector<double>>& acts,
                         std::vector<double>& probs) const {
    acts.resize(layers_.size());
    std::span<const double> prev = x;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        const Layer& layer = layers_[k];
        acts[k].assign(static_cast<std::size_t>(layer.out), 0.0);
        const bool last = k + 1 == layers_.size();
        for (int j = 0; j < layer.out; ++j) {
            const double* row = params_.data() + layer.w_offset +
                                static_cast<std::size_t>(j) * layer.in;
            double s = params_[layer.b_offset + j];
            for (int i = 0; i < layer.in; ++i) s += row[i] * prev[i];
            acts[k][static_cast<std::size_t>(j)] = last ? s : std::tanh(s);
        }
        prev = acts[k];
    }
    return softmax_ce(acts.back(), label, probs);
}

std::vector<double> MlpModel::logits(std::span<const double> x) const {
    check_input(*this, x, 0);
    std::vector<std::vector<double>> acts;
    std::vector<double> probs;
    forward(x, 0, acts, probs);
    return acts.back();
}

namespace {

/// Shared MLP backward pass. grad_params may be empty (input gradient only);
/// input_grad may be empty (parameter gradient only).
template <typename LayerVec>
void mlp_backward(const LayerVec& layers, std::span<const double> params,
                  std::span<const double> x, const std::vector<std::vector<double>>& acts,
                  std::vector<double> g, std::span<double> input_grad,
                  std::span<double> grad_params) {
    for (std::size_t k = layers.size(); k-- > 0;) {
        const auto& layer = layers[k];
        std::span<const double> a_prev =
            k == 0 ? x : std::span<const double>(acts[k - 1]);
        if (!grad_params.empty()) {
            for (int j = 0; j < layer.out; ++j) {
                double* wrow = grad_params.data() + layer.w_offset +
                               static_cast<std::size_t>(j) * layer.in;
                const double gj = g[static_cast<std::size_t>(j)];
                for (int i = 0; i < layer.in; ++i) wrow[i] += gj * a_prev[i];
                grad_params[layer.b_offset + j] += gj;
            }
        }
        const bool need_below = k > 0 || !input_grad.empty();
        if (!need_below) break;
        std::vector<double> gin(static_cast<std::size_t>(layer.in), 0.0);
        for (int j = 0; j < layer.out; ++j) {
            const double* row =
                params.data() + layer.w_offset + static_cast<std::size_t>(j) * layer.in;
            const double gj = g[static_cast<std::size_t>(j)];
            for (int i = 0; i < layer.in; ++i) gin[static_cast<std::size_t>(i)] += gj * row[i];
        }
        if (k > 0) {
            const auto& a = acts[k - 1];
            for (std::size_t i = 0; i < gin.size(); ++i) gin[i] *= 1.0 - a[i] * a[i];
            g = std::move(gin);
        } else if (!input_grad.empty()) {
            std::copy(gin.begin(), gin.end(), input_grad.begin());
        }
    }
}

}  // namespace

double MlpModel::loss_and_input_gradient(std::span<const double> x, int label,
                                         std::span<double> grad) const {
    check_input(*this, x, label);
    if (grad.size() != input_size())
        throw std::invalid_argument("gradient buffer has the wrong size");
    std::vector<std::vector<double>> acts;
    std::vector<double> probs;
    const double loss = forward(x, label, acts, probs);
    probs[static_cast<std::size_t>(label)] -= 1.0;
    mlp_backward(layers_, std::span<const double>(params_), x, acts, std::move(probs), grad,
                 {});
    return loss;
}

double MlpModel::accumulate_param_gradient(std::span<const double> x, int label,
                                           std::span<double> grad) const {
    check_input(*this, x, label);
    if (grad.size() != params_.size())
        throw std::invalid_argument("parameter gradient buffer has the wrong size");
    std::vector<std::vector<double>> acts;
    std::vector<double> probs;
    const double loss = forward(x, label, acts, probs);
    probs[static_cast<std::size_t>(label)] -= 1.0;
    mlp_backward(layers_, std::span<const double>(params_), x, acts, std::move(probs), {},
                 grad);
    return loss;
}

// ---------------------------------------------------------------------------
// Conv net

void ConvConfig::validate() const {
    if (height <= 0 || width <= 0 || channels <= 0)
        throw std::invalid_argument("conv input shape must be positive");
    if (height % 2 != 0 || width % 2 != 0)
        throw std::invalid_argument("conv model needs even height/width for the 2x2 pool");
    if (filters1 <= 0 || filters2 <= 0) throw std::invalid_argument("filter counts must be positive");
    if (num_classes < 2) throw std::invalid_argument("conv needs at least two classes");
}

struct ConvModel::Workspace {
    std::vector<double> a1, a2, pooled, probs;
    std::vector<double> d2, d1;  // gradients flowing back through the convs
};

ConvModel::ConvModel(ConvConfig config, std::uint64_t seed) : config_(config) {
    config_.validate();
    const int c = config_.channels, f1 = config_.filters1, f2 = config_.filters2;
    pooled_h_ = config_.height / 2;
    pooled_w_ = config_.width / 2;
    const std::size_t k1n = static_cast<std::size_t>(f1) * 9 * c;
    const std::size_t k2n = static_cast<std::size_t>(f2) * 9 * f1;
    const std::size_t flat = static_cast<std::size_t>(pooled_h_) * pooled_w_ * f2;
    const std::size_t wn = static_cast<std::size_t>(config_.num_classes) * flat;
    k1_ = 0;
    b1_ = k1_ + k1n;
    k2_ = b1_ + f1;
    b2_ = k2_ + k2n;
    w_ = b2_ + f2;
    b_ = w_ + wn;
    params_.assign(b_ + config_.num_classes, 0.0);

    std::mt19937_64 rng(mix_seed(seed, 0x696e6974));
    const double l1 = glorot_limit(9 * c, 9 * f1);
    for (std::size_t i = 0; i < k1n; ++i) params_[k1_ + i] = rng_uniform(rng, -l1, l1);
    const double l2 = glorot_limit(9 * f1, 9 * f2);
    for (std::size_t i = 0; i < k2n; ++i) params_[k2_ + i] = rng_uniform(rng, -l2, l2);
    const double l3 = glorot_limit(static_cast<int>(flat), config_.num_classes);
    for (std::size_t i = 0; i < wn; ++i) params_[w_ + i] = rng_uniform(rng, -l3, l3);
}

namespace {

/// 3x3 same-padding correlation with tanh, HWC layout.
void conv3x3_tanh(std::span<const double> in, int h, int w, int cin,
                  const double* kernel, const double* bias, int cout,
                  std::vector<double>& out) {
    out.assign(static_cast<std::size_t>(h) * w * cout, 0.0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int f = 0; f < cout; ++f) {
                double s = bias[f];
                for (int kr = 0; kr < 3; ++kr) {
                    const int rr = r + kr - 1;
                    if (rr < 0 || rr >= h) continue;
                    for (int kc = 0; kc < 3; ++kc) {
                        const int cc = c + kc - 1;
                        if (cc < 0 || cc >= w) continue;
                        const double* kp = kernel + ((static_cast<std::size_t>(f) * 3 + kr) * 3 + kc) * cin;
                        const double* ip = in.data() + (static_cast<std::size_t>(rr) * w + cc) * cin;
                        for (int ch = 0; ch < cin; ++ch) s += kp[ch] * ip[ch];
                    }
                }
                out[(static_cast<std::size_t>(r) * w + c) * cout + f] = std::tanh(s);
            }
}

/// Adjoint of conv3x3_tanh given dpre (gradient at the pre-activation).
/// Accumulates into din (may be empty) and dkernel/dbias (may be empty).
void conv3x3_backward(std::span<const double> in, int h, int w, int cin,
                      const double* kernel, int cout, std::span<const double> dpre,
                      std::vector<double>* din, double* dkernel, double* dbias) {
    if (din) din->assign(static_cast<std::size_t>(h) * w * cin, 0.0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int f = 0; f < cout; ++f) {
                const double g = dpre[(static_cast<std::size_t>(r) * w + c) * cout + f];
                if (g == 0.0) continue;
                if (dbias) dbias[f] += g;
                for (int kr = 0; kr < 3; ++kr) {
                    const int rr = r + kr - 1;
                    if (rr < 0 || rr >= h) continue;
                    for (int kc = 0; kc < 3; ++kc) {
                        const int cc = c + kc - 1;
                        if (cc < 0 || cc >= w) continue;
                        const std::size_t koff = ((static_cast<std::size_t>(f) * 3 + kr) * 3 + kc) * cin;
                        const std::size_t ioff = (static_cast<std::size_t>(rr) * w + cc) * cin;
                        for (int ch = 0; ch < cin; ++ch) {
                            if (din) (*din)[ioff + ch] += g * kernel[koff + ch];
                            if (dkernel) dkernel[koff + ch] += g * in[ioff + ch];
                        }
                    }
                }
            }
}

void tanh_backward_inplace(std::vector<double>& g, const std::vector<double>& activation) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - activation[i] * activation[i];
}

}  // namespace

double ConvModel::forward(std::span<const double> x, int label, Workspace& ws) const {
    const int h = config_.height, w = config_.width, c = config_.channels;
    const int f1 = config_.filters1, f2 = config_.filters2;
    conv3x3_tanh(x, h, w, c, params_.data() + k1_, params_.data() + b1_, f1, ws.a1);
    conv3x3_tanh(ws.a1, h, w, f1, params_.data() + k2_, params_.data() + b2_, f2, ws.a2);
    ws.pooled.assign(static_cast<std::size_t>(pooled_h_) * pooled_w_ * f2, 0.0);
    for (int r = 0; r < pooled_h_; ++r)
        for (int col = 0; col < pooled_w_; ++col)
            for (int f = 0; f < f2; ++f) {
                double s = 0.0;
                for (int dr = 0; dr < 2; ++dr)
                    for (int dc = 0; dc < 2; ++dc)
                        s += ws.a2[(static_cast<std::size_t>(2 * r + dr) * w + 2 * col + dc) * f2 + f];
                ws.pooled[(static_cast<std::size_t>(r) * pooled_w_ + col) * f2 + f] = 0.25 * s;
            }
    const std::size_t flat = ws.pooled.size();
    std::vector<double> z(static_cast<std::size_t>(config_.num_classes));
    for (int k = 0; k < config_.num_classes; ++k) {
        const double* row = params_.data() + w_ + static_cast<std::size_t>(k) * flat;
        double s = params_[b_ + k];
        for (std::size_t i = 0; i < flat; ++i) s += row[i] * ws.pooled[i];
        z[static_cast<std::size_t>(k)] = s;
    }
    return softmax_ce(z, label, ws.probs);
}

void ConvModel::backward(std::span<const double> x, Workspace& ws,
                         std::span<double> input_grad, std::span<double> param_grad) const {
    const int h = config_.height, w = config_.width, c = config_.channels;
    const int f1 = config_.filters1, f2 = config_.filters2;
    const std::size_t flat = ws.pooled.size();
    const std::vector<double>& g_logits = ws.probs;  // already probs - onehot

    std::vector<double> dpool(flat, 0.0);
    for (int k = 0; k < config_.num_classes; ++k) {
        const double* row = params_.data() + w_ + static_cast<std::size_t>(k) * flat;
        const double gk = g_logits[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < flat; ++i) dpool[i] += gk * row[i];
        if (!param_grad.empty()) {
            double* wrow = param_grad.data() + w_ + static_cast<std::size_t>(k) * flat;
            for (std::size_t i = 0; i < flat; ++i) wrow[i] += gk * ws.pooled[i];
            param_grad[b_ + k] += gk;
        }
    }

    // unpool: each 2x2 cell shared the average equally
    ws.d2.assign(static_cast<std::size_t>(h) * w * f2, 0.0);
    for (int r = 0; r < pooled_h_; ++r)
        for (int col = 0; col < pooled_w_; ++col)
            for (int f = 0; f < f2; ++f) {
                const double g = 0.25 * dpool[(static_cast<std::size_t>(r) * pooled_w_ + col) * f2 + f];
                for (int dr = 0; dr < 2; ++dr)
                    for (int dc = 0; dc < 2; ++dc)
                        ws.d2[(static_cast<std::size_t>(2 * r + dr) * w + 2 * col + dc) * f2 + f] = g;
            }
    tanh_backward_inplace(ws.d2, ws.a2);

    conv3x3_backward(ws.a1, h, w, f1, params_.data() + k2_, f2, ws.d2, &ws.d1,
                     param_grad.empty() ? nullptr : param_grad.data() + k2_,
                     param_grad.empty() ? nullptr : param_grad.data() + b2_);
    tanh_backward_inplace(ws.d1, ws.a1);

    std::vector<double> dx;
    conv3x3_backward(x, h, w, c, params_.data() + k1_, f1, ws.d1,
                     input_grad.empty() ? nullptr : &dx,
                     param_grad.empty() ? nullptr : param_grad.data() + k1_,
                     param_grad.empty() ? nullptr : param_grad.data() + b1_);
    if (!input_grad.empty()) std::copy(dx.begin(), dx.end(), input_grad.begin());
}

std::vector<double> ConvModel::logits(std::span<const double> x) const {
    check_input(*this, x, 0);
    Workspace ws;
    forward(x, 0, ws);
    // recover logits from probs is lossy; recompute the head directly
    const std::size_t flat = ws.pooled.size();
    std::vector<double> z(static_cast<std::size_t>(config_.num_classes));
    for (int k = 0; k < config_.num_classes; ++k) {
        const double* row = params_.data() + w_ + static_cast<std::size_t>(k) * flat;
        double s = params_[b_ + k];
        for (std::size_t i = 0; i < flat; ++i) s += row[i] * ws.pooled[i];
        z[static_cast<std::size_t>(k)] = s;
    }
    return z;
}

double ConvModel::loss_and_input_gradient(std::span<const double> x, int label,
                                          std::span<double> grad) const {
    check_input(*this, x, label);
    if (grad.size() != input_size())
        throw std::invalid_argument("gradient buffer has the wrong size");
    Workspace ws;
    const double loss = forward(x, label, ws);
    ws.probs[static_cast<std::size_t>(label)] -= 1.0;
    backward(x, ws, grad, {});
    return loss;
}

double ConvModel::accumulate_param_gradient(std::span<const double> x, int label,
                                            std::span<double> grad) const {
    check_input(*this, x, label);
    if (grad.size() != params_.size())
        throw std::invalid_argument("parameter gradient buffer has the wrong size");
    Workspace ws;
    const double loss = forward(x, label, ws);
    ws.probs[static_cast<std::size_t>(label)] -= 1.0;
    backward(x, ws, {}, grad);
    return loss;
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
    if (!(adversarial_fraction >= 0.0 && adversarial_fraction <= 1.0))
        throw std::invalid_argument("adversarial fraction must lie in [0,1]");
    if (!(p_min >= 1.0 && p_max <= 2.0 && p_min <= p_max))
        throw std::invalid_argument("adversarial p interval must satisfy 1 <= p_min <= p_max <= 2");
}

double accuracy(const GradientOracle& model, const Dataset& data) {
    if (data.examples.empty()) throw std::invalid_argument("accuracy of an empty dataset");
    std::size_t hits = 0;
    for (const auto& ex : data.examples)
        if (model.predict_class(ex.image) == ex.label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(data.examples.size());
}

double mean_loss(const GradientOracle& model, const Dataset& data) {
    if (data.examples.empty()) throw std::invalid_argument("mean loss of an empty dataset");
    double total = 0.0;
    for (const auto& ex : data.examples) total += model.loss(ex.image.data, ex.label);
    return total / static_cast<double>(data.examples.size());
}

namespace {

TrainStats run_training(TrainableModel& model, const Dataset& data, const TrainConfig& config,
                        AdversarialExampleSource* source, const EpochCallback& on_epoch) {
    config.validate();
    data.validate();
    if (data.examples.empty()) throw std::invalid_argument("cannot train on an empty dataset");
    if (data.num_classes != model.num_classes() ||
        static_cast<std::size_t>(data.height()) * data.width() * data.channels() !=
            model.input_size())
        throw std::invalid_argument("dataset shape does not match the model");

    TrainStats stats;
    stats.initial_loss = mean_loss(model, data);
    if (config.epochs == 0) {
        stats.final_loss = stats.initial_loss;
        return stats;
    }

    const std::size_t n_params = model.parameters().size();
    std::vector<double> grad(n_params), adam_m(n_params, 0.0), adam_v(n_params, 0.0);
    long adam_t = 0;

    std::mt19937_64 shuffle_rng(mix_seed(config.seed, 0x73687566));  // "shuf"
    std::mt19937_64 p_rng(mix_seed(config.seed, 0x70616476));        // "padv"; only
    // touched for adversarial slots, so fraction 0 reproduces plain training.

    std::vector<std::size_t> order(data.examples.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        deterministic_shuffle(order, shuffle_rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t batch_n =
                std::min<std::size_t>(config.batch_size, order.size() - start);
            const std::size_t adv_n =
                source ? static_cast<std::size_t>(config.adversarial_fraction *
                                                  static_cast<double>(batch_n))
                       : 0;
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t slot = 0; slot < batch_n; ++slot) {
                const auto& ex = data.examples[order[start + slot]];
                if (slot < adv_n) {
                    const double p = rng_uniform(p_rng, config.p_min, config.p_max);
                    const std::uint64_t attack_seed = mix_seed(
                        mix_seed(mix_seed(config.seed, 0x61747461), epoch * 1000003ULL + batches),
                        slot);
                    const auto delta = source->perturb(model, ex.image, ex.label, p, attack_seed);
                    std::vector<double> adv(ex.image.data);
                    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] += delta[i];
                    batch_loss += model.accumulate_param_gradient(adv, ex.label, grad);
                } else {
                    batch_loss += model.accumulate_param_gradient(ex.image.data, ex.label, grad);
                }
            }
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("training diverged (non-finite loss) at epoch " +
                                         std::to_string(epoch));
            const double inv_n = 1.0 / static_cast<double>(batch_n);
            ++adam_t;
            const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(adam_t));
            const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(adam_t));
            auto params = model.parameters();
            for (std::size_t i = 0; i < n_params; ++i) {
                const double g = grad[i] * inv_n;
                adam_m[i] = kAdamBeta1 * adam_m[i] + (1.0 - kAdamBeta1) * g;
                adam_v[i] = kAdamBeta2 * adam_v[i] + (1.0 - kAdamBeta2) * g * g;
                params[i] -= config.learning_rate * (adam_m[i] / c1) /
                             (std::sqrt(adam_v[i] / c2) + kAdamEps);
            }
            epoch_loss += batch_loss * inv_n;
            ++batches;
        }
        if (on_epoch) on_epoch(epoch, epoch_loss / static_cast<double>(batches));
    }

    stats.epochs_run = config.epochs;
    stats.final_loss = mean_loss(model, data);
    if (!std::isfinite(stats.final_loss))
        throw std::runtime_error("training diverged: final loss is not finite");
    if (stats.final_loss >= stats.initial_loss)
        throw std::runtime_error("training did not reduce the loss (" +
                                 std::to_string(stats.initial_loss) + " -> " +
                                 std::to_string(stats.final_loss) + ")");
    return stats;
}

}  // namespace

TrainStats train(TrainableModel& model, const Dataset& data, const TrainConfig& config,
                 const EpochCallback& on_epoch) {
    return run_training(model, data, config, nullptr, on_epoch);
}

TrainStats adversarial_train(TrainableModel& model, const Dataset& data,
                             const TrainConfig& config, AdversarialExampleSource& source,
                             const EpochCallback& on_epoch) {
    return run_training(model, data, config, &source, on_epoch);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kModelMagic[4] = {'L', 'P', 'M', 'D'};
constexpr std::uint8_t kModelVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

struct Cursor {
    const unsigned char* data;
    std::size_t size;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) {
        if (pos + n > size)
            throw TruncatedFile(std::string("model checkpoint ends inside ") + what);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return data[pos++];
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos++]) << (8 * i);
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
};

}  // namespace

void save_model(const TrainableModel& model, const std::filesystem::path& path) {
    std::string out;
    out.append(kModelMagic, 4);
    out.push_back(static_cast<char>(kModelVersion));
    const auto* mlp = dynamic_cast<const MlpModel*>(&model);
    const auto* conv = dynamic_cast<const ConvModel*>(&model);
    if (!mlp && !conv) throw std::invalid_argument("unknown model kind, cannot serialize");
    out.push_back(mlp ? 0 : 1);
    out.append(10, '\0');  // reserved, pads the header to 16 bytes
    put_u32(out, static_cast<std::uint32_t>(model.input_height()));
    put_u32(out, static_cast<std::uint32_t>(model.input_width()));
    put_u32(out, static_cast<std::uint32_t>(model.input_channels()));
    put_u32(out, static_cast<std::uint32_t>(model.num_classes()));
    if (mlp) {
        put_u32(out, static_cast<std::uint32_t>(mlp->config().hidden.size()));
        for (int h : mlp->config().hidden) put_u32(out, static_cast<std::uint32_t>(h));
    } else {
        put_u32(out, static_cast<std::uint32_t>(conv->config().filters1));
        put_u32(out, static_cast<std::uint32_t>(conv->config().filters2));
    }
    const auto params = model.parameters();
    put_u64(out, params.size());
    for (double v : params) put_f32(out, static_cast<float>(v));
    write_file_atomic(path, out);
}

std::unique_ptr<TrainableModel> load_model(const std::filesystem::path& path) {
    const std::string blob = read_file(path);
    Cursor cur{reinterpret_cast<const unsigned char*>(blob.data()), blob.size()};
    cur.need(16, "the header");
    if (std::memcmp(blob.data(), kModelMagic, 4) != 0)
        throw MalformedHeader("not a model checkpoint (bad magic)");
    cur.pos = 4;
    if (cur.u8("the version") != kModelVersion)
        throw MalformedHeader("unsupported model checkpoint version");
    const std::uint8_t kind = cur.u8("the model kind");
    if (kind > 1) throw MalformedHeader("unknown model kind " + std::to_string(kind));
    cur.pos = 16;
    const int h = static_cast<int>(cur.u32("the shape"));
    const int w = static_cast<int>(cur.u32("the shape"));
    const int c = static_cast<int>(cur.u32("the shape"));
    const int k = static_cast<int>(cur.u32("the shape"));

    std::unique_ptr<TrainableModel> model;
    if (kind == 0) {
        MlpConfig cfg;
        cfg.height = h;
        cfg.width = w;
        cfg.channels = c;
        cfg.num_classes = k;
        cfg.hidden.clear();
        const std::uint32_t n_hidden = cur.u32("the layer list");
        if (n_hidden > 64) throw MalformedHeader("implausible hidden layer count");
        for (std::uint32_t i = 0; i < n_hidden; ++i)
            cfg.hidden.push_back(static_cast<int>(cur.u32("the layer list")));
        model = std::make_unique<MlpModel>(cfg, 0);
    } else {
        ConvConfig cfg;
        cfg.height = h;
        cfg.width = w;
        cfg.channels = c;
        cfg.num_classes = k;
        cfg.filters1 = static_cast<int>(cur.u32("the filter counts"));
        cfg.filters2 = static_cast<int>(cur.u32("the filter counts"));
        model = std::make_unique<ConvModel>(cfg, 0);
    }
    auto params = model->parameters();
    const std::uint64_t count = cur.u64("the parameter count");
    if (count != params.size())
        throw MalformedHeader("parameter count " + std::to_string(count) +
                              " does not match the architecture (" +
                              std::to_string(params.size()) + ")");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const float v = cur.f32("the parameter blob");
        if (!std::isfinite(v)) throw ValueOutOfRange("non-finite parameter in checkpoint");
        params[i] = static_cast<double>(v);
    }
    if (cur.pos != cur.size)
        throw MalformedHeader("trailing bytes after the parameter blob");
    return model;
}

}  // namespace lpa
