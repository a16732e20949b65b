#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lpattack/model.hpp"
#include "lpattack/types.hpp"

namespace lpa {

enum class StepRule {
    classic_fw,  ///< eta_t = 2 / (t + 2)
    fixed,       ///< eta_t = fixed_step
};

struct AttackConfig {
    double p = 2.0;
    double epsilon = 1.0;
    int iterations = 100;  ///< oracle evaluations per restart
    StepRule step_rule = StepRule::classic_fw;
    double fixed_step = 0.05;
    int restarts = 1;  ///< first restart starts at zero, later ones randomly
    std::uint64_t seed = 0;

    void validate() const;
};

struct AttackResult {
    Perturbation perturbation;  ///< best-loss iterate across restarts
    int clean_prediction = 0;
    int adversarial_prediction = 0;
    bool success = false;  ///< prediction changed relative to the clean input
    double clean_loss = 0.0;
    double best_loss = 0.0;
    std::vector<double> loss_trace;  ///< per-iteration loss of the best restart
};

/// Frank-Wolfe ascent of the classification loss over the lp ball (p > 1)
/// intersected with the image box: each iteration maximizes the linear model
/// of the loss via lmo_lp_box and moves delta toward that vertex. Iterates
/// stay feasible by convexity; the best-so-far loss is non-decreasing.
AttackResult afw_attack(const GradientOracle& model, const Image& x, int label,
                        const AttackConfig& config);

/// Projected gradient ascent for p = 1: steps along the l2-normalized
/// gradient with fixed step 2 * epsilon / iterations and re-projects onto the
/// l1 ball / box intersection.
AttackResult l1_attack(const GradientOracle& model, const Image& x, int label,
                       const AttackConfig& config);

/// Routes p = 1 to l1_attack and p in (1,2] to afw_attack.
AttackResult attack(const GradientOracle& model, const Image& x, int label,
                    const AttackConfig& config);

struct MeasureOptions {
    bool enabled = true;
    double pixel_threshold = 0.0;  ///< for l0_fraction
    int taylor_neighborhood = 4;
};

struct ExampleReport {
    std::size_t index = 0;
    int label = 0;
    int clean_prediction = 0;
    int adversarial_prediction = 0;
    bool success = false;
    bool correct_after = false;  ///< adversarial prediction still equals the label
    double lp_ratio = 0.0;       ///< ||delta||_p / epsilon, 0 when epsilon = 0
    bool sparsity_defined = false;
    // NaN when measures are disabled or (for the first two) undefined
    double gini = 0.0, hoyer = 0.0, l0_fraction = 0.0;
    double t_gauss = 0.0, t_lowpass = 0.0, t_taylor = 0.0;
};

struct MeasureMeans {
    double gini = 0.0, hoyer = 0.0, l0_fraction = 0.0;
    double t_gauss = 0.0, t_lowpass = 0.0, t_taylor = 0.0;
};

struct EvaluationResult {
    double clean_accuracy = 0.0;
    double adversarial_accuracy = 0.0;
    double success_rate = 0.0;
    MeasureMeans means;  ///< sparsity means skip undefined (all-zero) deltas
    int undefined_sparsity = 0;
    double max_lp_ratio = 0.0;  ///< feasibility audit over all examples
    std::vector<ExampleReport> examples;
};

/// Attacks every example of the dataset with per-example seeds derived from
/// config.seed, so results are independent of the thread count.
EvaluationResult evaluate_attack(const GradientOracle& model, const Dataset& data,
                                 const AttackConfig& config,
                                 const MeasureOptions& measures = {}, unsigned threads = 1);

/// Per-p attack budget: interpolates a calibrated (p, epsilon) table when one
/// is present, otherwise falls back to epsilon0 * n^(1/p - 1/2) (constant l2
/// budget scaled to match typical lp ball volumes).
struct EpsilonSchedule {
    double epsilon0 = 0.5;
    std::vector<std::pair<double, double>> table;  ///< (p, epsilon) sorted by p

    double epsilon_for(double p, std::size_t n) const;
};

/// Adversarial-training hook running the attack above at the scheduled budget.
class FwAttackSource final : public AdversarialExampleSource {
public:
    FwAttackSource(AttackConfig base, EpsilonSchedule schedule)
        : base_(base), schedule_(std::move(schedule)) {}

    std::vector<double> perturb(const GradientOracle& model, const Image& x, int label,
                                double p, std::uint64_t seed) override;

private:
    AttackConfig base_;
    EpsilonSchedule schedule_;
};

}  // namespace lpa
