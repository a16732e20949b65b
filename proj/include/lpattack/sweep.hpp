#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lpattack/attack.hpp"
#include "lpattack/calibration.hpp"
#include "lpattack/model.hpp"

namespace lpa {

/// Measure identifiers in canonical order (sparsity first, then smoothness).
const std::vector<std::string>& all_measure_names();

/// {1.0, 1.01, 1.05, 1.10, ..., 2.00}: the 0.05-step grid plus the
/// near-1 point where the lp geometry is most extreme.
std::vector<double> default_p_grid();

/// Min-max normalization onto [0,1]. NaN entries stay NaN and are ignored
/// when locating the extremes; a constant curve maps to all ones. Throws if
/// no finite value exists.
std::vector<double> normalize_curve(const std::vector<double>& raw);

struct MeasureCurve {
    std::string name;
    std::vector<double> grid;
    std::vector<double> raw;
    std::vector<double> normalized;
};

/// Largest beta such that some grid point keeps every normalized curve at or
/// above beta, and the set of grid points achieving it (1e-12 slack). Grid
/// points where any curve is NaN cannot certify and are skipped.
std::pair<double, std::vector<double>> beta_opt_and_set(
    const std::vector<MeasureCurve>& curves);

struct SweepPoint {
    double p = 0.0;
    double epsilon = 0.0;
    double clean_accuracy = 0.0;
    double adversarial_accuracy = 0.0;
    double success_rate = 0.0;
    MeasureMeans means;
    int undefined_sparsity = 0;
    double max_lp_ratio = 0.0;
    bool flagged = false;  ///< calibration bracket failure at this p
};

struct SweepConfig {
    std::vector<double> grid;  ///< empty = default_p_grid()
    std::uint64_t seed = 0;
    AttackConfig attack;  ///< p/epsilon/seed overwritten per grid point
    CalibrationConfig calibration;
    std::vector<std::string> measures;  ///< empty = all six
    unsigned threads = 1;
    /// Reuse budgets instead of calibrating (entries must cover the grid).
    std::optional<CalibrationTable> budgets;
    std::function<void(std::size_t done, std::size_t total, double p)> progress;

    void validate() const;
};

struct SweepResult {
    std::string model_id;
    std::string dataset_id;
    std::uint64_t seed = 0;
    std::vector<double> grid;
    std::vector<SweepPoint> points;
    std::vector<MeasureCurve> curves;  ///< selected measures, canonical order
    double beta_opt = 0.0;
    std::vector<double> optimal_p_set;
    CalibrationTable calibration;

    /// Midpoint of the optimal-p set (min+max)/2; the scalar summary used
    /// when aggregating runs.
    double optimal_p_mid() const;
};

/// Calibrates (or looks up) the budget for every grid p, attacks the full
/// test split at that budget, collects measure means, normalizes each curve
/// and extracts beta_opt. Fully deterministic for a fixed seed and thread
/// count independent.
SweepResult run_sweep(const GradientOracle& model, const Dataset& test,
                      const SweepConfig& config);

/// Builds the (raw + normalized) curve of one measure from sweep points;
/// flagged points contribute NaN.
MeasureCurve curve_for(const std::vector<SweepPoint>& points, const std::vector<double>& grid,
                       const std::string& name);

struct AggregateGroup {
    std::string key;                 ///< model_id or dataset_id
    std::vector<double> optimal_ps;  ///< one midpoint per run
    double mean_p = 0.0;
    double std_p = 0.0;  ///< population standard deviation
};

enum class GroupBy { model, dataset };

/// Groups sweep results and summarizes their optimal-p midpoints.
std::vector<AggregateGroup> aggregate_sweeps(const std::vector<SweepResult>& runs,
                                             GroupBy group_by);

}  // namespace lpa
