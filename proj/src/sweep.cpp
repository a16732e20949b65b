#include "lpattack/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "lpattack/util.hpp"

namespace lpa {

const std::vector<std::string>& all_measure_names() {
    static const std::vector<std::string> names = {"gini",    "hoyer",     "l0_fraction",
                                                   "t_gauss", "t_lowpass", "t_taylor"};
    return names;
}

std::vector<double> default_p_grid() {
    std::vector<double> grid = {1.0, 1.01};
    for (int i = 21; i <= 40; ++i) grid.push_back(static_cast<double>(i) * 0.05);
    return grid;
}

std::vector<double> normalize_curve(const std::vector<double>& raw) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : raw)
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!std::isfinite(lo))
        throw std::invalid_argument("cannot normalize a curve with no finite values");
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!std::isfinite(raw[i]))
            out[i] = std::numeric_limits<double>::quiet_NaN();
        else if (hi == lo)
            out[i] = 1.0;  // constant curve: every point is its own maximum
        else
            out[i] = (raw[i] - lo) / (hi - lo);
    }
    return out;
}

std::pair<double, std::vector<double>> beta_opt_and_set(
    const std::vector<MeasureCurve>& curves) {
    if (curves.empty()) throw std::invalid_argument("beta_opt needs at least one curve");
    const auto& grid = curves.front().grid;
    for (const auto& c : curves) {
        if (c.grid != grid)
            throw std::invalid_argument("curves disagree on the p grid");
        if (c.normalized.size() != grid.size())
            throw std::invalid_argument("curve '" + c.name + "' has no normalized values");
    }
    std::vector<double> floor(grid.size(), std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (const auto& c : curves) {
            const double v = c.normalized[i];
            if (std::isnan(v)) {
                // a missing measure cannot certify this grid point
                floor[i] = -std::numeric_limits<double>::infinity();
                break;
            }
            floor[i] = std::min(floor[i], v);
        }
    const double beta = *std::max_element(floor.begin(), floor.end());
    if (!std::isfinite(beta))
        throw std::invalid_argument("no grid point has all curves defined");
    std::vector<double> set;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (floor[i] >= beta - 1e-12) set.push_back(grid[i]);
    return {beta, set};
}

void SweepConfig::validate() const {
    for (double p : grid)
        if (!(p >= 1.0 && p <= 2.0))
            throw std::invalid_argument("sweep grid values must lie in [1,2]");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw std::invalid_argument("sweep grid must be strictly increasing");
    for (const auto& m : measures) {
        const auto& names = all_measure_names();
        if (std::find(names.begin(), names.end(), m) == names.end())
            throw std::invalid_argument("unknown measure '" + m + "'");
    }
}

double SweepResult::optimal_p_mid() const {
    if (optimal_p_set.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto [lo, hi] = std::minmax_element(optimal_p_set.begin(), optimal_p_set.end());
    return 0.5 * (*lo + *hi);
}

SweepResult run_sweep(const GradientOracle& model, const Dataset& test,
                      const SweepConfig& config) {
    config.validate();
    test.validate();

    SweepResult result;
    result.seed = config.seed;
    result.grid = config.grid.empty() ? default_p_grid() : config.grid;
    const auto measure_names =
        config.measures.empty() ? all_measure_names() : config.measures;

    if (config.budgets) {
        // a preloaded table must cover every grid point exactly
        for (double p : result.grid) {
            const auto& entries = config.budgets->entries;
            if (std::none_of(entries.begin(), entries.end(),
                             [&](const CalibrationResult& e) { return e.p == p; }))
                throw std::invalid_argument("preloaded calibration lacks p = " +
                                            std::to_string(p));
        }
        result.calibration = *config.budgets;
    }

    const MeasureOptions with_measures{};  // defaults: all measures on
    for (std::size_t gi = 0; gi < result.grid.size(); ++gi) {
        const double p = result.grid[gi];
        CalibrationResult cal;
        if (config.budgets) {
            for (const auto& e : config.budgets->entries)
                if (e.p == p) cal = e;
        } else {
            AttackConfig cal_attack = config.attack;
            cal_attack.seed = mix_seed(config.seed, 0xca11b000ULL + gi);
            CalibrationConfig cc = config.calibration;
            cc.subset_seed = config.seed;
            cal = calibrate_epsilon(model, test, p, cal_attack, cc, config.threads);
            result.calibration.entries.push_back(cal);
        }

        AttackConfig attack_cfg = config.attack;
        attack_cfg.p = p;
        attack_cfg.epsilon = cal.epsilon;
        attack_cfg.seed = mix_seed(config.seed, 0xa77ac000ULL + gi);
        const EvaluationResult eval =
            evaluate_attack(model, test, attack_cfg, with_measures, config.threads);

        SweepPoint point;
        point.p = p;
        point.epsilon = cal.epsilon;
        point.clean_accuracy = eval.clean_accuracy;
        point.adversarial_accuracy = eval.adversarial_accuracy;
        point.success_rate = eval.success_rate;
        point.means = eval.means;
        point.undefined_sparsity = eval.undefined_sparsity;
        point.max_lp_ratio = eval.max_lp_ratio;
        point.flagged = cal.bracket_failed;
        result.points.push_back(point);
        if (config.progress) config.progress(gi + 1, result.grid.size(), p);
    }

    for (const auto& name : all_measure_names()) {
        if (std::find(measure_names.begin(), measure_names.end(), name) ==
            measure_names.end())
            continue;
        result.curves.push_back(curve_for(result.points, result.grid, name));
    }

    const auto [beta, set] = beta_opt_and_set(result.curves);
    result.beta_opt = beta;
    result.optimal_p_set = set;
    return result;
}

MeasureCurve curve_for(const std::vector<SweepPoint>& points, const std::vector<double>& grid,
                       const std::string& name) {
    const auto raw_of = [&](const SweepPoint& pt) {
        if (name == "gini") return pt.means.gini;
        if (name == "hoyer") return pt.means.hoyer;
        if (name == "l0_fraction") return pt.means.l0_fraction;
        if (name == "t_gauss") return pt.means.t_gauss;
        if (name == "t_lowpass") return pt.means.t_lowpass;
        if (name == "t_taylor") return pt.means.t_taylor;
        throw std::invalid_argument("unknown measure '" + name + "'");
    };
    MeasureCurve curve;
    curve.name = name;
    curve.grid = grid;
    for (const auto& pt : points)
        // flagged points carry no trustworthy budget; exclude them
        curve.raw.push_back(pt.flagged ? std::numeric_limits<double>::quiet_NaN()
                                       : raw_of(pt));
    curve.normalized = normalize_curve(curve.raw);
    return curve;
}

std::vector<AggregateGroup> aggregate_sweeps(const std::vector<SweepResult>& runs,
                                             GroupBy group_by) {
    std::map<std::string, AggregateGroup> groups;
    for (const auto& run : runs) {
        const std::string& key =
            group_by == GroupBy::model ? run.model_id : run.dataset_id;
        auto& g = groups[key];
        g.key = key;
        g.optimal_ps.push_back(run.optimal_p_mid());
    }
    std::vector<AggregateGroup> out;
    for (auto& [key, g] : groups) {
        double mean = 0.0;
        for (double v : g.optimal_ps) mean += v;
        mean /= static_cast<double>(g.optimal_ps.size());
        double var = 0.0;
        for (double v : g.optimal_ps) var += (v - mean) * (v - mean);
        var /= static_cast<double>(g.optimal_ps.size());
        g.mean_p = mean;
        g.std_p = std::sqrt(var);
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace lpa
