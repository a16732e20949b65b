#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "lpattack/types.hpp"

namespace lpa {

/// Differentiable classifier exposing exactly what the attacks need: logits
/// and the loss gradient with respect to the input. Inputs are flat HWC
/// buffers; they may drift a hair outside [0,1] (iterates of the attacks do).
class GradientOracle {
public:
    virtual ~GradientOracle() = default;

    virtual int num_classes() const = 0;
    virtual int input_height() const = 0;
    virtual int input_width() const = 0;
    virtual int input_channels() const = 0;

    virtual std::vector<double> logits(std::span<const double> x) const = 0;

    /// Cross-entropy loss of (x, label) and its gradient w.r.t. x (written to
    /// grad, which must have input_size() entries). Returns the loss.
    virtual double loss_and_input_gradient(std::span<const double> x, int label,
                                           std::span<double> grad) const = 0;

    std::size_t input_size() const {
        return static_cast<std::size_t>(input_height()) * input_width() * input_channels();
    }

    std::vector<double> predict_probs(std::span<const double> x) const;
    std::vector<double> predict_probs(const Image& image) const;
    /// argmax of the logits; ties break toward the lowest class index.
    int predict_class(std::span<const double> x) const;
    int predict_class(const Image& image) const;
    double loss(std::span<const double> x, int label) const;
    std::vector<double> input_gradient(const Image& image, int label) const;
};

/// A classifier that can also be trained: flat parameter vector plus the
/// parameter-gradient accumulator the optimizer drives.
class TrainableModel : public GradientOracle {
public:
    virtual std::span<double> parameters() = 0;
    virtual std::span<const double> parameters() const = 0;

    /// Adds dLoss/dParameters of one example into grad (same layout as
    /// parameters()) and returns the loss.
    virtual double accumulate_param_gradient(std::span<const double> x, int label,
                                             std::span<double> grad) const = 0;
};

struct MlpConfig {
    int height = 16;
    int width = 16;
    int channels = 3;
    std::vector<int> hidden = {64};  ///< empty = linear classifier
    int num_classes = 4;

    void validate() const;
};

/// Fully connected tanh network (flatten -> hidden... -> logits).
class MlpModel final : public TrainableModel {
public:
    MlpModel(MlpConfig config, std::uint64_t seed);

    int num_classes() const override { return config_.num_classes; }
    int input_height() const override { return config_.height; }
    int input_width() const override { return config_.width; }
    int input_channels() const override { return config_.channels; }
    std::vector<double> logits(std::span<const double> x) const override;
    double loss_and_input_gradient(std::span<const double> x, int label,
                                   std::span<double> grad) const override;
    std::span<double> parameters() override { return params_; }
    std::span<const double> parameters() const override { return params_; }
    double accumulate_param_gradient(std::span<const double> x, int label,
                                     std::span<double> grad) const override;

    const MlpConfig& config() const { return config_; }

private:
    struct Layer {
        std::size_t w_offset, b_offset;
        int in, out;
    };
    // Runs the forward pass, filling pre-activations per layer; returns loss.
    double forward(std::span<const double> x, int label, std::vector<std::vector<double>>& acts,
                   std::vector<double>& probs) const;

    MlpConfig config_;
    std::vector<Layer> layers_;
    std::vector<double> params_;
};

struct ConvConfig {
    int height = 16;
    int width = 16;
    int channels = 3;
    int filters1 = 8;
    int filters2 = 8;
    int num_classes = 4;

    void validate() const;  // height/width must be even (2x2 average pool)
};

/// Small convolutional net: two 3x3 same-padding tanh convolutions, 2x2
/// average pool, then a linear head.
class ConvModel final : public TrainableModel {
public:
    ConvModel(ConvConfig config, std::uint64_t seed);

    int num_classes() const override { return config_.num_classes; }
    int input_height() const override { return config_.height; }
    int input_width() const override { return config_.width; }
    int input_channels() const override { return config_.channels; }
    std::vector<double> logits(std::span<const double> x) const override;
    double loss_and_input_gradient(std::span<const double> x, int label,
                                   std::span<double> grad) const override;
    std::span<double> parameters() override { return params_; }
    std::span<const double> parameters() const override { return params_; }
    double accumulate_param_gradient(std::span<const double> x, int label,
                                     std::span<double> grad) const override;

    const ConvConfig& config() const { return config_; }

private:
    struct Workspace;
    double forward(std::span<const double> x, int label, Workspace& ws) const;
    void backward(std::span<const double> x, Workspace& ws, std::span<double> input_grad,
                  std::span<double> param_grad) const;

    ConvConfig config_;
    std::vector<double> params_;
    // parameter block offsets
    std::size_t k1_, b1_, k2_, b2_, w_, b_;
    int pooled_h_, pooled_w_;
};

struct TrainConfig {
    int epochs = 10;
    int batch_size = 32;
    double learning_rate = 1e-3;  // Adam, beta1 = 0.9, beta2 = 0.999, eps = 1e-8
    std::uint64_t seed = 0;
    double adversarial_fraction = 0.0;  ///< leading share of each batch replaced by attacks
    double p_min = 1.0;                 ///< adversarial p ~ uniform [p_min, p_max]
    double p_max = 2.0;

    void validate() const;
};

struct TrainStats {
    double initial_loss = 0.0;  ///< mean clean loss before the first step
    double final_loss = 0.0;    ///< mean clean loss after the last epoch
    int epochs_run = 0;
};

/// Supplies perturbations during adversarial training. Implementations own
/// the attack configuration and the per-p budget rule.
class AdversarialExampleSource {
public:
    virtual ~AdversarialExampleSource() = default;
    virtual std::vector<double> perturb(const GradientOracle& model, const Image& x, int label,
                                        double p, std::uint64_t seed) = 0;
};

using EpochCallback = std::function<void(int epoch, double mean_batch_loss)>;

/// Adam training with a seeded shuffle; epochs = 0 leaves the initialized
/// model untouched. Throws if the loss diverges or fails to decrease.
TrainStats train(TrainableModel& model, const Dataset& data, const TrainConfig& config,
                 const EpochCallback& on_epoch = {});

/// Like train, but the leading floor(adversarial_fraction * B) examples of
/// every batch are replaced by source-perturbed versions at p drawn uniformly
/// from [p_min, p_max] (its own RNG stream: fraction 0 reproduces train()
/// exactly). Loss bookkeeping for the decrease check stays on clean data.
TrainStats adversarial_train(TrainableModel& model, const Dataset& data,
                             const TrainConfig& config, AdversarialExampleSource& source,
                             const EpochCallback& on_epoch = {});

double accuracy(const GradientOracle& model, const Dataset& data);
double mean_loss(const GradientOracle& model, const Dataset& data);

/// Binary checkpoint ("LPMD" header, architecture descriptor, float32
/// little-endian parameter blob). Round-trips byte-identically.
void save_model(const TrainableModel& model, const std::filesystem::path& path);
std::unique_ptr<TrainableModel> load_model(const std::filesystem::path& path);

}  // namespace lpa
