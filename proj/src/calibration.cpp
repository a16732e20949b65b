#include "lpattack/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "lpattack/util.hpp"

namespace lpa {

void CalibrationConfig::validate() const {
    if (subset_size < 1) throw std::invalid_argument("calibration subset must be non-empty");
    if (max_doublings < 1 || max_bisections < 0)
        throw std::invalid_argument("calibration search limits out of range");
    if (!(rel_width_stop > 0.0)) throw std::invalid_argument("rel_width_stop must be > 0");
}

namespace {

Dataset subsample(const Dataset& data, int subset_size, std::uint64_t seed) {
    Dataset out;
    out.num_classes = data.num_classes;
    out.split = data.split;
    if (static_cast<std::size_t>(subset_size) >= data.examples.size()) {
        out.examples = data.examples;
        return out;
    }
    std::vector<std::size_t> order(data.examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(seed, 0x73756273));  // "subs"
    deterministic_shuffle(order, rng);
    out.examples.reserve(static_cast<std::size_t>(subset_size));
    for (int i = 0; i < subset_size; ++i)
        out.examples.push_back(data.examples[order[static_cast<std::size_t>(i)]]);
    return out;
}

}  // namespace

CalibrationResult calibrate_epsilon(const GradientOracle& model, const Dataset& test,
                                    double p, const AttackConfig& attack_template,
                                    const CalibrationConfig& config, unsigned threads) {
    config.validate();
    test.validate();
    if (!(p >= 1.0 && p <= 2.0))
        throw std::invalid_argument("calibration needs p in [1,2], got " + std::to_string(p));
    if (test.examples.empty())
        throw std::invalid_argument("cannot calibrate on an empty test split");

    const Dataset subset = subsample(test, config.subset_size, config.subset_seed);

    CalibrationResult result;
    result.p = p;
    result.clean_accuracy = accuracy(model, subset);
    if (result.clean_accuracy <= 0.0)
        throw std::invalid_argument(
            "clean accuracy on the calibration subset is zero; nothing to calibrate against");
    result.target_accuracy = result.clean_accuracy / 3.0;

    const MeasureOptions no_measures{.enabled = false};
    const auto probe = [&](double eps) {
        AttackConfig cfg = attack_template;
        cfg.p = p;
        cfg.epsilon = eps;
        const auto eval = evaluate_attack(model, subset, cfg, no_measures, threads);
        result.trace.push_back({eps, eval.adversarial_accuracy});
        return eval.adversarial_accuracy;
    };

    const double n = static_cast<double>(model.input_size());
    const double eps_cap = 2.0 * std::pow(n, 1.0 / p);  // beyond this the box alone binds
    double eps = 0.01 * std::pow(n, 1.0 / p);
    double acc = probe(eps);

    // best-known epsilon meeting the target, if any
    double hi = std::numeric_limits<double>::quiet_NaN();
    double hi_acc = 0.0, lo = 0.0;
    if (acc <= result.target_accuracy) {
        hi = eps;
        hi_acc = acc;
    } else {
        for (int d = 0; d < config.max_doublings && eps < eps_cap; ++d) {
            lo = eps;
            eps *= 2.0;
            acc = probe(eps);
            if (acc <= result.target_accuracy) {
                hi = eps;
                hi_acc = acc;
                break;
            }
        }
    }
    if (std::isnan(hi)) {
        // even the cap-sized budget leaves accuracy above the target
        result.bracket_failed = true;
        result.epsilon = eps;
        result.achieved_accuracy = acc;
        return result;
    }

    for (int b = 0; b < config.max_bisections && lo > 0.0; ++b) {
        if (hi / lo - 1.0 <= config.rel_width_stop) break;
        const double mid = std::sqrt(lo * hi);
        const double mid_acc = probe(mid);
        if (mid_acc <= result.target_accuracy) {
            hi = mid;
            hi_acc = mid_acc;
        } else {
            lo = mid;
        }
    }
    result.epsilon = hi;
    result.achieved_accuracy = hi_acc;
    return result;
}

std::vector<std::pair<double, double>> CalibrationTable::budget_pairs() const {
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(entries.size());
    for (const auto& e : entries) pairs.emplace_back(e.p, e.epsilon);
    return pairs;
}

void save_calibration(const CalibrationTable& table, const std::filesystem::path& path) {
    nlohmann::json j;
    j["model_id"] = table.model_id;
    j["dataset_id"] = table.dataset_id;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : table.entries) {
        j["entries"].push_back({{"p", e.p},
                                {"epsilon", e.epsilon},
                                {"achieved", e.achieved_accuracy},
                                {"target", e.target_accuracy},
                                {"clean", e.clean_accuracy},
                                {"bracket_failed", e.bracket_failed}});
    }
    write_file_atomic(path, j.dump(2) + "\n");
}

CalibrationTable load_calibration(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedHeader("calibration file is not valid JSON: " + std::string(e.what()));
    }
    CalibrationTable table;
    try {
        table.model_id = j.at("model_id").get<std::string>();
        table.dataset_id = j.at("dataset_id").get<std::string>();
        for (const auto& item : j.at("entries")) {
            CalibrationResult e;
            e.p = item.at("p").get<double>();
            e.epsilon = item.at("epsilon").get<double>();
            e.achieved_accuracy = item.at("achieved").get<double>();
            e.target_accuracy = item.at("target").get<double>();
            e.clean_accuracy = item.value("clean", 0.0);
            e.bracket_failed = item.value("bracket_failed", false);
            table.entries.push_back(e);
        }
    } catch (const nlohmann::json::exception& e) {
        throw MalformedHeader("calibration file misses required fields: " +
                              std::string(e.what()));
    }
    for (std::size_t i = 0; i < table.entries.size(); ++i) {
        const auto& e = table.entries[i];
        if (!(e.p >= 1.0 && e.p <= 2.0) || !(e.epsilon >= 0.0) || !std::isfinite(e.epsilon))
            throw ValueOutOfRange("calibration entry " + std::to_string(i) +
                                  " carries an out-of-range value");
        if (i > 0 && !(e.p > table.entries[i - 1].p))
            throw ValueOutOfRange("calibration entries must be sorted by ascending p");
    }
    return table;
}

}  // namespace lpa
