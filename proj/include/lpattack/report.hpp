#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "lpattack/sweep.hpp"

namespace lpa {

/// One row per grid point, 9-significant-digit floats, LF endings. Columns:
/// p,epsilon,clean_accuracy,adv_accuracy,success_rate,<six>_mean...,
/// <six>_norm..., undefined_sparsity_count. All six measures appear no matter
/// which subset drove beta_opt.
std::string measures_csv_text(const SweepResult& result);
void write_measures_csv(const SweepResult& result, const std::filesystem::path& path);

struct MeasuresTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::vector<double> column(const std::string& name) const;
};

/// Strict parser for the writer's output (exact header, one row per line).
MeasuresTable parse_measures_csv(const std::string& text);

/// {"beta_opt", "optimal_p_set", "per_measure_argmax"}.
nlohmann::json optimal_p_json(const SweepResult& result);
void write_optimal_p_json(const SweepResult& result, const std::filesystem::path& path);

/// Normalized measure curves vs p, one polyline per measure. Deterministic
/// output (fixed palette, fixed precision, no timestamps).
std::string render_curves_svg(const SweepResult& result);

/// Optimal-p chart: per group an error bar (mean +/- std), a dot at the mean
/// and a cross per individual run.
std::string render_optimal_p_svg(const std::vector<AggregateGroup>& groups);

/// Creates base/run_id; run directories are append-only, so an existing
/// directory is an error.
std::filesystem::path create_run_directory(const std::filesystem::path& base,
                                           const std::string& run_id);

struct RunInfo {
    std::string run_id;
    std::string command;
    std::uint64_t seed = 0;
    std::string model_id;
    std::string dataset_id;
};

/// manifest.json: run metadata, config echo and an FNV-1a 64 checksum per
/// artifact (paths relative to the run directory).
void write_manifest(const std::filesystem::path& run_dir, const RunInfo& info,
                    const nlohmann::json& config, const std::vector<std::string>& artifacts);

struct RunSummary {
    RunInfo info;
    double beta_opt = 0.0;
    std::vector<double> optimal_p_set;
};

/// Reads manifest.json + optimal_p.json back from a completed run directory.
RunSummary load_run_summary(const std::filesystem::path& run_dir);

}  // namespace lpa
