#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lpattack/attack.hpp"
#include "lpattack/model.hpp"
#include "lpattack/types.hpp"

namespace lpa {

struct CalibrationProbe {
    double epsilon = 0.0;
    double accuracy = 0.0;
};

struct CalibrationResult {
    double p = 2.0;
    double epsilon = 0.0;           ///< chosen budget
    double achieved_accuracy = 0.0;  ///< adversarial accuracy at epsilon
    double target_accuracy = 0.0;    ///< clean accuracy on the subset / 3
    double clean_accuracy = 0.0;
    bool bracket_failed = false;  ///< accuracy never dropped to the target
    std::vector<CalibrationProbe> trace;
};

struct CalibrationConfig {
    int subset_size = 200;     ///< seeded subsample of the test split
    int max_doublings = 24;    ///< geometric search for the bracket
    int max_bisections = 20;
    double rel_width_stop = 0.05;  ///< stop once hi/lo - 1 falls below this
    std::uint64_t subset_seed = 0;

    void validate() const;
};

/// Finds the smallest probed epsilon at which the attack pushes adversarial
/// accuracy to (or below) one third of clean accuracy on a fixed seeded
/// subset. Doubles epsilon from 0.01 * n^(1/p) until the target is bracketed
/// (flagging bracket_failed if the cap is hit), then bisects, keeping the
/// smallest epsilon whose accuracy met the target. Every probe lands in the
/// trace. The attack template supplies iterations/step rule/restarts/seed;
/// its p and epsilon are overwritten.
CalibrationResult calibrate_epsilon(const GradientOracle& model, const Dataset& test,
                                    double p, const AttackConfig& attack_template,
                                    const CalibrationConfig& config = {},
                                    unsigned threads = 1);

struct CalibrationTable {
    std::string model_id;
    std::string dataset_id;
    std::vector<CalibrationResult> entries;  ///< ascending p

    /// (p, epsilon) pairs for EpsilonSchedule interpolation.
    std::vector<std::pair<double, double>> budget_pairs() const;
};

/// JSON round-trip: {"model_id", "dataset_id", "entries": [{"p", "epsilon",
/// "achieved", "target", ...}]}.
void save_calibration(const CalibrationTable& table, const std::filesystem::path& path);
CalibrationTable load_calibration(const std::filesystem::path& path);

}  // namespace lpa
