#include "lpattack/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "lpattack/lp_geometry.hpp"
#include "lpattack/smoothness.hpp"
#include "lpattack/sparsity.hpp"
#include "lpattack/util.hpp"

namespace lpa {

void AttackConfig::validate() const {
    if (!(p >= 1.0 && p <= 2.0))
        throw std::invalid_argument("attack p must lie in [1,2], got " + std::to_string(p));
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw std::invalid_argument("attack budget must be finite and >= 0");
    if (iterations < 1) throw std::invalid_argument("attacks need at least one iteration");
    if (step_rule == StepRule::fixed && !(fixed_step > 0.0 && fixed_step <= 1.0))
        throw std::invalid_argument("fixed step must lie in (0,1]");
    if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
}

namespace {

struct RestartOutcome {
    std::vector<double> delta;
    double best_loss = -std::numeric_limits<double>::infinity();
    std::vector<double> loss_trace;
};

/// Random feasible starting point for restart r > 0: a vertex of the
/// feasible set in a random direction, shrunk by a random factor.
std::vector<double> random_start(std::span<const double> x, const AttackConfig& config,
                                 std::mt19937_64& rng) {
    std::vector<double> direction(x.size());
    for (double& d : direction) d = rng_uniform(rng, -1.0, 1.0);
    const double rho = rng_uniform(rng);  // in [0,1)
    if (config.p > 1.0) {
        auto sol = lmo_lp_box(direction, x, config.epsilon * rho, config.p);
        return std::move(sol.delta);
    }
    for (double& d : direction) d *= config.epsilon;
    if (rho == 0.0) return std::vector<double>(x.size(), 0.0);
    return project_l1_box(direction, x, std::max(config.epsilon * rho, 1e-300));
}

template <typename StepFn>
RestartOutcome ascend(const GradientOracle& model, const Image& image, int label,
                      const AttackConfig& config, std::vector<double> delta,
                      const StepFn& step) {
    RestartOutcome out;
    out.delta = delta;
    out.loss_trace.reserve(static_cast<std::size_t>(config.iterations));
    std::vector<double> x(image.data);
    std::vector<double> grad(x.size());
    for (int t = 0; t < config.iterations; ++t) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = image.data[i] + delta[i];
        const double loss = model.loss_and_input_gradient(x, label, grad);
        out.loss_trace.push_back(loss);
        if (loss > out.best_loss) {
            out.best_loss = loss;
            out.delta = delta;
        }
        if (t + 1 < config.iterations) step(t, grad, delta);
    }
    return out;
}

AttackResult finalize(const GradientOracle& model, const Image& image, int label,
                      const AttackConfig& config, RestartOutcome best) {
    AttackResult result;
    result.clean_prediction = model.predict_class(image.data);
    result.clean_loss = best.loss_trace.empty() ? model.loss(image.data, label)
                                                : best.loss_trace.front();
    // guarantee the budget before handing the perturbation out
    if (config.epsilon > 0.0) {
        const double nrm = lp_norm(best.delta, config.p);
        if (nrm > config.epsilon) {
            const double scale = config.epsilon / nrm;
            for (double& d : best.delta) d *= scale;
        }
    }
    result.perturbation =
        Perturbation(std::move(best.delta), config.p, config.epsilon, image);
    std::vector<double> adv(image.data);
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] += result.perturbation.delta[i];
    result.adversarial_prediction = model.predict_class(adv);
    result.success = result.adversarial_prediction != result.clean_prediction;
    result.best_loss = best.best_loss;
    result.loss_trace = std::move(best.loss_trace);
    return result;
}

template <typename StepFn>
AttackResult run_restarts(const GradientOracle& model, const Image& image, int label,
                          const AttackConfig& config, const StepFn& step) {
    if (image.size() != model.input_size())
        throw std::invalid_argument("image shape does not match the model input");
    if (label < 0 || label >= model.num_classes())
        throw ValueOutOfRange("attack label outside the class range");

    if (config.epsilon == 0.0) {
        // the feasible set is {0}; evaluate once and stop
        RestartOutcome out;
        out.delta.assign(image.size(), 0.0);
        out.best_loss = model.loss(image.data, label);
        out.loss_trace.push_back(out.best_loss);
        return finalize(model, image, label, config, std::move(out));
    }

    RestartOutcome best;
    for (int r = 0; r < config.restarts; ++r) {
        std::vector<double> start(image.size(), 0.0);
        if (r > 0) {
            std::mt19937_64 rng(mix_seed(config.seed, 0x72737461ULL + r));  // "rsta"
            start = random_start(image.data, config, rng);
        }
        RestartOutcome out = ascend(model, image, label, config, std::move(start), step);
        if (out.best_loss > best.best_loss) best = std::move(out);
    }
    return finalize(model, image, label, config, std::move(best));
}

}  // namespace

AttackResult afw_attack(const GradientOracle& model, const Image& x, int label,
                        const AttackConfig& config) {
    config.validate();
    if (!(config.p > 1.0))
        throw std::invalid_argument("afw_attack requires p > 1 (use l1_attack at p = 1)");
    const auto step = [&](int t, const std::vector<double>& grad, std::vector<double>& delta) {
        const double eta = config.step_rule == StepRule::classic_fw
                               ? 2.0 / (static_cast<double>(t) + 2.0)
                               : config.fixed_step;
        auto sol = lmo_lp_box(grad, x.data, config.epsilon, config.p);
        for (std::size_t i = 0; i < delta.size(); ++i)
            delta[i] += eta * (sol.delta[i] - delta[i]);
    };
    return run_restarts(model, x, label, config, step);
}

AttackResult l1_attack(const GradientOracle& model, const Image& x, int label,
                       const AttackConfig& config) {
    config.validate();
    if (config.p != 1.0) throw std::invalid_argument("l1_attack requires p = 1");
    const double eta = 2.0 * config.epsilon / static_cast<double>(config.iterations);
    const auto step = [&](int, const std::vector<double>& grad, std::vector<double>& delta) {
        double norm = 0.0;
        for (double g : grad) norm += g * g;
        norm = std::sqrt(norm);
        if (norm == 0.0) return;  // flat spot: keep the current iterate
        std::vector<double> moved(delta.size());
        for (std::size_t i = 0; i < delta.size(); ++i)
            moved[i] = delta[i] + eta * grad[i] / norm;
        delta = project_l1_box(moved, x.data, config.epsilon);
    };
    return run_restarts(model, x, label, config, step);
}

AttackResult attack(const GradientOracle& model, const Image& x, int label,
                    const AttackConfig& config) {
    return config.p == 1.0 ? l1_attack(model, x, label, config)
                           : afw_attack(model, x, label, config);
}

EvaluationResult evaluate_attack(const GradientOracle& model, const Dataset& data,
                                 const AttackConfig& config, const MeasureOptions& measures,
                                 unsigned threads) {
    config.validate();
    data.validate();
    if (data.examples.empty()) throw std::invalid_argument("cannot evaluate an empty dataset");
    if (static_cast<std::size_t>(data.height()) * data.width() * data.channels() !=
            model.input_size() ||
        data.num_classes != model.num_classes())
        throw std::invalid_argument("dataset does not match the model");

    const AlphaSchedule gauss = default_gaussian_schedule();
    const AlphaSchedule lowpass = default_lowpass_schedule(data.height(), data.width());
    const double nan = std::numeric_limits<double>::quiet_NaN();

    EvaluationResult result;
    result.examples.resize(data.examples.size());
    parallel_for(data.examples.size(), threads, [&](std::size_t i) {
        const auto& ex = data.examples[i];
        AttackConfig local = config;
        local.seed = mix_seed(config.seed, i);
        const AttackResult r = attack(model, ex.image, ex.label, local);

        ExampleReport& rep = result.examples[i];
        rep.index = i;
        rep.label = ex.label;
        rep.clean_prediction = r.clean_prediction;
        rep.adversarial_prediction = r.adversarial_prediction;
        rep.success = r.success;
        rep.correct_after = r.adversarial_prediction == ex.label;
        rep.lp_ratio = config.epsilon > 0.0
                           ? lp_norm(r.perturbation.delta, config.p) / config.epsilon
                           : 0.0;
        rep.gini = rep.hoyer = rep.l0_fraction = nan;
        rep.t_gauss = rep.t_lowpass = rep.t_taylor = nan;
        if (!measures.enabled) return;

        std::vector<double> mag(r.perturbation.delta.size());
        bool any = false;
        for (std::size_t k = 0; k < mag.size(); ++k) {
            mag[k] = std::abs(r.perturbation.delta[k]);
            any = any || mag[k] > 0.0;
        }
        rep.sparsity_defined = any;
        if (any) {
            rep.gini = gini(mag);
            rep.hoyer = hoyer(mag);
        }
        rep.l0_fraction = l0_fraction(r.perturbation, measures.pixel_threshold);
        rep.t_gauss = smoothness_t_c(r.perturbation, SmoothingOperator::gaussian, gauss);
        rep.t_lowpass = smoothness_t_c(r.perturbation, SmoothingOperator::lowpass, lowpass);
        rep.t_taylor = taylor_smoothness(r.perturbation, measures.taylor_neighborhood);
    });

    const double n = static_cast<double>(result.examples.size());
    double clean = 0.0, adv = 0.0, success = 0.0;
    double g = 0.0, hy = 0.0, l0 = 0.0, tg = 0.0, tl = 0.0, tt = 0.0;
    std::size_t defined = 0;
    for (const auto& rep : result.examples) {
        clean += rep.clean_prediction == rep.label;
        adv += rep.correct_after;
        success += rep.success;
        result.max_lp_ratio = std::max(result.max_lp_ratio, rep.lp_ratio);
        if (!measures.enabled) continue;
        if (rep.sparsity_defined) {
            g += rep.gini;
            hy += rep.hoyer;
            ++defined;
        }
        l0 += rep.l0_fraction;
        tg += rep.t_gauss;
        tl += rep.t_lowpass;
        tt += rep.t_taylor;
    }
    result.clean_accuracy = clean / n;
    result.adversarial_accuracy = adv / n;
    result.success_rate = success / n;
    result.undefined_sparsity = static_cast<int>(result.examples.size() - defined);
    if (measures.enabled) {
        result.means.gini = defined ? g / static_cast<double>(defined) : nan;
        result.means.hoyer = defined ? hy / static_cast<double>(defined) : nan;
        result.means.l0_fraction = l0 / n;
        result.means.t_gauss = tg / n;
        result.means.t_lowpass = tl / n;
        result.means.t_taylor = tt / n;
    } else {
        result.means = {nan, nan, nan, nan, nan, nan};
        result.undefined_sparsity = 0;
    }
    return result;
}

double EpsilonSchedule::epsilon_for(double p, std::size_t n) const {
    if (!(p >= 1.0 && p <= 2.0))
        throw std::invalid_argument("budget lookup needs p in [1,2]");
    if (table.empty())
        return epsilon0 * std::pow(static_cast<double>(n), 1.0 / p - 0.5);
    if (p <= table.front().first) return table.front().second;
    if (p >= table.back().first) return table.back().second;
    for (std::size_t i = 1; i < table.size(); ++i) {
        if (p <= table[i].first) {
            const auto& [p0, e0] = table[i - 1];
            const auto& [p1, e1] = table[i];
            const double t = (p - p0) / (p1 - p0);
            return e0 + t * (e1 - e0);
        }
    }
    return table.back().second;
}

std::vector<double> FwAttackSource::perturb(const GradientOracle& model, const Image& x,
                                            int label, double p, std::uint64_t seed) {
    AttackConfig cfg = base_;
    cfg.p = p;
    cfg.epsilon = schedule_.epsilon_for(p, model.input_size());
    cfg.seed = seed;
    return attack(model, x, label, cfg).perturbation.delta;
}

}  // namespace lpa
