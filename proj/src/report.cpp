#include "lpattack/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "lpattack/util.hpp"

namespace lpa {

namespace {

const char* kCsvHeader =
    "p,epsilon,clean_accuracy,adv_accuracy,success_rate,gini_mean,hoyer_mean,l0_frac_mean,"
    "t_gauss_mean,t_lowpass_mean,t_taylor_mean,gini_norm,hoyer_norm,l0_norm,t_gauss_norm,"
    "t_lowpass_norm,t_taylor_norm,undefined_sparsity_count";

std::string g9(double v) { return format_g(v, 9); }

}  // namespace

std::string measures_csv_text(const SweepResult& result) {
    // normalized columns cover all six measures, not just the beta_opt subset
    std::vector<MeasureCurve> curves;
    for (const auto& name : all_measure_names())
        curves.push_back(curve_for(result.points, result.grid, name));

    std::string out = kCsvHeader;
    out += '\n';
    for (std::size_t i = 0; i < result.points.size(); ++i) {
        const SweepPoint& pt = result.points[i];
        out += g9(pt.p);
        out += ',' + g9(pt.epsilon);
        out += ',' + g9(pt.clean_accuracy);
        out += ',' + g9(pt.adversarial_accuracy);
        out += ',' + g9(pt.success_rate);
        out += ',' + g9(pt.means.gini);
        out += ',' + g9(pt.means.hoyer);
        out += ',' + g9(pt.means.l0_fraction);
        out += ',' + g9(pt.means.t_gauss);
        out += ',' + g9(pt.means.t_lowpass);
        out += ',' + g9(pt.means.t_taylor);
        for (const auto& c : curves) out += ',' + g9(c.normalized[i]);
        out += ',' + std::to_string(pt.undefined_sparsity);
        out += '\n';
    }
    return out;
}

void write_measures_csv(const SweepResult& result, const std::filesystem::path& path) {
    write_file_atomic(path, measures_csv_text(result));
}

std::vector<double> MeasuresTable::column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw std::invalid_argument("no column '" + name + "'");
    const std::size_t idx = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(row[idx]);
    return out;
}

MeasuresTable parse_measures_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw MalformedHeader("empty measures csv");
    if (line != kCsvHeader)
        throw MalformedHeader("measures csv header does not match the expected schema");

    MeasuresTable table;
    {
        std::istringstream hdr(line);
        std::string col;
        while (std::getline(hdr, col, ',')) table.columns.push_back(col);
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row_in(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(row_in, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ValueOutOfRange("unparsable cell '" + cell + "' on line " +
                                      std::to_string(line_no));
            }
        }
        if (row.size() != table.columns.size())
            throw MalformedHeader("line " + std::to_string(line_no) + " has " +
                                  std::to_string(row.size()) + " cells, expected " +
                                  std::to_string(table.columns.size()));
        table.rows.push_back(std::move(row));
    }
    return table;
}

nlohmann::json optimal_p_json(const SweepResult& result) {
    nlohmann::json j;
    j["beta_opt"] = result.beta_opt;
    j["optimal_p_set"] = result.optimal_p_set;
    nlohmann::json argmax = nlohmann::json::object();
    for (const auto& curve : result.curves) {
        std::vector<double> ps;
        for (std::size_t i = 0; i < curve.normalized.size(); ++i)
            if (curve.normalized[i] >= 1.0 - 1e-12) ps.push_back(curve.grid[i]);
        argmax[curve.name] = ps;
    }
    j["per_measure_argmax"] = argmax;
    return j;
}

void write_optimal_p_json(const SweepResult& result, const std::filesystem::path& path) {
    write_file_atomic(path, optimal_p_json(result).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// SVG rendering. Plain hand-assembled markup: fixed canvas, fixed palette,
// %.2f coordinates, so identical inputs give identical bytes.

namespace {

constexpr double kW = 860, kH = 520;
constexpr double kLeft = 70, kRight = 830, kTop = 40, kBottom = 470;

const char* kPalette[6] = {"#1f77b4", "#d62728", "#2ca02c",
                           "#9467bd", "#ff7f0e", "#8c564b"};

std::string f2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

void svg_open(std::string& s) {
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f2(kW) + "\" height=\"" +
         f2(kH) + "\" viewBox=\"0 0 " + f2(kW) + " " + f2(kH) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void svg_text(std::string& s, double x, double y, const std::string& text,
              const std::string& anchor = "start", int size = 13) {
    s += "<text x=\"" + f2(x) + "\" y=\"" + f2(y) + "\" font-family=\"sans-serif\" font-size=\"" +
         std::to_string(size) + "\" text-anchor=\"" + anchor + "\">" + text + "</text>\n";
}

void svg_line(std::string& s, double x1, double y1, double x2, double y2,
              const std::string& stroke, double width = 1.0) {
    s += "<line x1=\"" + f2(x1) + "\" y1=\"" + f2(y1) + "\" x2=\"" + f2(x2) + "\" y2=\"" +
         f2(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + f2(width) + "\"/>\n";
}

}  // namespace

std::string render_curves_svg(const SweepResult& result) {
    const double p_lo = result.grid.front(), p_hi = result.grid.back();
    const auto px = [&](double p) {
        if (p_hi == p_lo) return (kLeft + kRight) / 2;  // singleton grid
        return kLeft + (p - p_lo) / (p_hi - p_lo) * (kRight - kLeft);
    };
    const auto py = [&](double v) { return kBottom - v * (kBottom - kTop); };

    std::string s;
    svg_open(s);
    svg_text(s, (kLeft + kRight) / 2, 22, "normalized measures vs p", "middle", 15);
    // axes and ticks
    svg_line(s, kLeft, kBottom, kRight, kBottom, "#000000");
    svg_line(s, kLeft, kTop, kLeft, kBottom, "#000000");
    for (int i = 0; i <= 10; ++i) {
        const double p = p_lo + (p_hi - p_lo) * i / 10.0;
        svg_line(s, px(p), kBottom, px(p), kBottom + 5, "#000000");
        svg_text(s, px(p), kBottom + 20, format_g(p, 3), "middle", 11);
    }
    for (int i = 0; i <= 5; ++i) {
        const double v = i / 5.0;
        svg_line(s, kLeft - 5, py(v), kLeft, py(v), "#000000");
        svg_text(s, kLeft - 10, py(v) + 4, format_g(v, 2), "end", 11);
    }
    svg_text(s, (kLeft + kRight) / 2, kH - 8, "p", "middle");

    for (std::size_t ci = 0; ci < result.curves.size(); ++ci) {
        const auto& curve = result.curves[ci];
        const char* color = kPalette[ci % 6];
        std::string pts;
        for (std::size_t i = 0; i < curve.grid.size(); ++i) {
            if (std::isnan(curve.normalized[i])) continue;  // flagged point
            pts += f2(px(curve.grid[i])) + "," + f2(py(curve.normalized[i])) + " ";
        }
        s += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        const double ly = kTop + 18.0 * static_cast<double>(ci);
        svg_line(s, kRight - 150, ly, kRight - 125, ly, color, 2.0);
        svg_text(s, kRight - 118, ly + 4, curve.name, "start", 12);
    }
    s += "</svg>\n";
    return s;
}

std::string render_optimal_p_svg(const std::vector<AggregateGroup>& groups) {
    const auto px = [&](double p) { return kLeft + (p - 1.0) * (kRight - kLeft); };
    std::string s;
    svg_open(s);
    svg_text(s, (kLeft + kRight) / 2, 22, "optimal p by group (dot = mean, bar = std)",
             "middle", 15);
    svg_line(s, kLeft, kBottom, kRight, kBottom, "#000000");
    for (int i = 0; i <= 10; ++i) {
        const double p = 1.0 + i / 10.0;
        svg_line(s, px(p), kBottom, px(p), kBottom + 5, "#000000");
        svg_text(s, px(p), kBottom + 20, format_g(p, 3), "middle", 11);
    }
    svg_text(s, (kLeft + kRight) / 2, kH - 8, "optimal p", "middle");

    const double row_h =
        groups.empty() ? 0.0 : (kBottom - kTop - 20.0) / static_cast<double>(groups.size());
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        const double y = kTop + 20.0 + row_h * (static_cast<double>(gi) + 0.5);
        const char* color = kPalette[gi % 6];
        svg_text(s, kLeft, y - 14, g.key, "start", 12);
        for (double p : g.optimal_ps) {  // individual runs as crosses
            svg_line(s, px(p) - 4, y - 4, px(p) + 4, y + 4, color, 1.2);
            svg_line(s, px(p) - 4, y + 4, px(p) + 4, y - 4, color, 1.2);
        }
        const double lo = std::max(1.0, g.mean_p - g.std_p);
        const double hi = std::min(2.0, g.mean_p + g.std_p);
        svg_line(s, px(lo), y, px(hi), y, color, 2.0);
        svg_line(s, px(lo), y - 5, px(lo), y + 5, color, 2.0);
        svg_line(s, px(hi), y - 5, px(hi), y + 5, color, 2.0);
        s += "<circle cx=\"" + f2(px(g.mean_p)) + "\" cy=\"" + f2(y) +
             "\" r=\"4\" fill=\"" + color + "\"/>\n";
    }
    s += "</svg>\n";
    return s;
}

std::filesystem::path create_run_directory(const std::filesystem::path& base,
                                           const std::string& run_id) {
    if (run_id.empty() || run_id.find('/') != std::string::npos)
        throw std::invalid_argument("run id must be a non-empty single path component");
    std::filesystem::create_directories(base);
    const auto dir = base / run_id;
    if (std::filesystem::exists(dir))
        throw std::runtime_error("run directory " + dir.string() +
                                 " already exists (runs are append-only)");
    std::filesystem::create_directory(dir);
    return dir;
}

void write_manifest(const std::filesystem::path& run_dir, const RunInfo& info,
                    const nlohmann::json& config, const std::vector<std::string>& artifacts) {
    nlohmann::json j;
    j["run_id"] = info.run_id;
    j["command"] = info.command;
    j["created_utc"] = iso8601_utc_now();
    j["seed"] = info.seed;
    j["model_id"] = info.model_id;
    j["dataset_id"] = info.dataset_id;
    j["config"] = config;
    j["checksum"] = "fnv1a64";
    nlohmann::json files = nlohmann::json::array();
    for (const auto& name : artifacts) {
        const auto path = run_dir / name;
        files.push_back({{"path", name},
                         {"bytes", std::filesystem::file_size(path)},
                         {"fnv1a64", to_hex(fnv1a64_file(path))}});
    }
    j["artifacts"] = files;
    write_file_atomic(run_dir / "manifest.json", j.dump(2) + "\n");
}

RunSummary load_run_summary(const std::filesystem::path& run_dir) {
    RunSummary summary;
    nlohmann::json manifest, optimal;
    try {
        manifest = nlohmann::json::parse(read_file(run_dir / "manifest.json"));
        optimal = nlohmann::json::parse(read_file(run_dir / "optimal_p.json"));
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedHeader("run directory " + run_dir.string() +
                              " holds invalid JSON: " + e.what());
    }
    try {
        summary.info.run_id = manifest.at("run_id").get<std::string>();
        summary.info.command = manifest.value("command", "");
        summary.info.seed = manifest.value("seed", 0ULL);
        summary.info.model_id = manifest.at("model_id").get<std::string>();
        summary.info.dataset_id = manifest.at("dataset_id").get<std::string>();
        summary.beta_opt = optimal.at("beta_opt").get<double>();
        summary.optimal_p_set = optimal.at("optimal_p_set").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw MalformedHeader("run directory " + run_dir.string() +
                              " misses manifest fields: " + e.what());
    }
    return summary;
}

}  // namespace lpa
