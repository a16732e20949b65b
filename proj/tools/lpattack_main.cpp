// lpattack: generate datasets, train the built-in classifiers, run lp-budget
// attacks, calibrate per-p budgets, sweep the p grid and report across runs.
//
// Exit codes: 0 success, 1 usage/validation error, 2 runtime failure.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lpattack/attack.hpp"
#include "lpattack/calibration.hpp"
#include "lpattack/dataset_io.hpp"
#include "lpattack/lp_geometry.hpp"
#include "lpattack/model.hpp"
#include "lpattack/report.hpp"
#include "lpattack/smoothness.hpp"
#include "lpattack/sparsity.hpp"
#include "lpattack/sweep.hpp"
#include "lpattack/synthetic.hpp"
#include "lpattack/types.hpp"
#include "lpattack/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lpa;

namespace {

std::string file_stem(const std::string& path) { return fs::path(path).stem().string(); }

std::vector<double> parse_grid(const std::string& spec) {
    if (spec == "default") return default_p_grid();
    std::vector<double> grid;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size())
            throw std::invalid_argument("grid entry '" + tok + "' is not a number");
        grid.push_back(v);
    }
    if (grid.empty()) throw std::invalid_argument("grid '" + spec + "' holds no p values");
    return grid;
}

std::vector<std::string> parse_name_list(const std::string& spec) {
    std::vector<std::string> names;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) names.push_back(tok);
    return names;
}

std::string default_run_id(const std::string& model_id, const std::string& dataset_id,
                           std::uint64_t seed) {
    std::string stamp = iso8601_utc_now();
    stamp.erase(std::remove(stamp.begin(), stamp.end(), ':'), stamp.end());
    stamp.erase(std::remove(stamp.begin(), stamp.end(), '-'), stamp.end());
    return model_id + "-" + dataset_id + "-s" + std::to_string(seed) + "-" + stamp + "-p" +
           std::to_string(static_cast<long>(getpid()));
}

std::string format_p_set(const std::vector<double>& set) {
    std::string out = "{";
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (i) out += ", ";
        out += format_g(set[i], 6);
    }
    return out + "}";
}

std::unique_ptr<TrainableModel> load_model_checked(const std::string& path) {
    if (!fs::exists(path)) throw std::runtime_error("model file " + path + " does not exist");
    return load_model(path);
}

Dataset load_dataset_checked(const std::string& path) {
    if (!fs::exists(path)) throw std::runtime_error("dataset file " + path + " does not exist");
    return load_dataset(path);
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
    std::string out;
    std::string split = "train";
    int classes = 4, height = 16, width = 16, channels = 3, per_class = 50;
    double noise = 0.1;
    std::uint64_t seed = 0;
};

void run_gen_data(const GenDataArgs& a) {
    SyntheticConfig cfg;
    cfg.height = a.height;
    cfg.width = a.width;
    cfg.channels = a.channels;
    cfg.num_classes = a.classes;
    cfg.samples_per_class = a.per_class;
    cfg.noise_amplitude = a.noise;
    cfg.split = split_from_string(a.split);
    const Dataset data = generate_synthetic(cfg, a.seed);
    save_dataset(data, a.out);
    std::cout << "wrote " << a.out << ": " << data.examples.size() << " examples, "
              << a.height << "x" << a.width << "x" << a.channels << ", " << a.classes
              << " classes (" << a.split << " split, seed " << a.seed << ")\n";
}

struct TrainArgs {
    std::string data, out;
    std::string arch = "mlp";
    std::vector<int> hidden = {64};
    int filters1 = 8, filters2 = 8;
    int epochs = 10, batch = 32;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    bool adversarial = false;
    double fraction = 0.5, p_min = 1.0, p_max = 2.0, epsilon0 = 0.5;
    int attack_iterations = 20;
    std::string budgets;
};

void run_train(const TrainArgs& a) {
    const Dataset data = load_dataset_checked(a.data);
    std::unique_ptr<TrainableModel> model;
    if (a.arch == "mlp") {
        MlpConfig mc;
        mc.height = data.height();
        mc.width = data.width();
        mc.channels = data.channels();
        mc.hidden = a.hidden;
        mc.num_classes = data.num_classes;
        model = std::make_unique<MlpModel>(mc, a.seed);
    } else if (a.arch == "conv") {
        ConvConfig cc;
        cc.height = data.height();
        cc.width = data.width();
        cc.channels = data.channels();
        cc.filters1 = a.filters1;
        cc.filters2 = a.filters2;
        cc.num_classes = data.num_classes;
        model = std::make_unique<ConvModel>(cc, a.seed);
    } else {
        throw std::invalid_argument("unknown architecture '" + a.arch + "' (mlp or conv)");
    }

    TrainConfig tc;
    tc.epochs = a.epochs;
    tc.batch_size = a.batch;
    tc.learning_rate = a.lr;
    tc.seed = a.seed;
    const auto on_epoch = [&](int epoch, double loss) {
        std::cout << "epoch " << epoch + 1 << "/" << a.epochs << " mean batch loss "
                  << format_g(loss, 6) << "\n";
    };

    TrainStats stats;
    if (a.adversarial) {
        tc.adversarial_fraction = a.fraction;
        tc.p_min = a.p_min;
        tc.p_max = a.p_max;
        EpsilonSchedule schedule;
        schedule.epsilon0 = a.epsilon0;
        if (!a.budgets.empty()) schedule.table = load_calibration(a.budgets).budget_pairs();
        AttackConfig base;
        base.iterations = a.attack_iterations;
        FwAttackSource source(base, schedule);
        stats = adversarial_train(*model, data, tc, source, on_epoch);
    } else {
        stats = train(*model, data, tc, on_epoch);
    }
    save_model(*model, a.out);
    std::cout << "wrote " << a.out << ": loss " << format_g(stats.initial_loss, 6) << " -> "
              << format_g(stats.final_loss, 6) << " over " << stats.epochs_run
              << " epochs, train accuracy " << format_g(accuracy(*model, data), 6) << "\n";
}

struct AttackArgs {
    std::string model, data, out;
    double p = 2.0;
    double epsilon = -1.0;
    int index = -1;
    int iterations = 100, restarts = 1;
    std::string step = "classic";
    double fixed_step = 0.05;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    double pixel_threshold = 0.0;
    int taylor_neighborhood = 4;
    bool dump_deltas = false;
};

json example_json(const ExampleReport& rep) {
    return json{{"index", rep.index},
                {"label", rep.label},
                {"clean_prediction", rep.clean_prediction},
                {"adversarial_prediction", rep.adversarial_prediction},
                {"success", rep.success},
                {"lp_ratio", rep.lp_ratio},
                {"gini", rep.gini},
                {"hoyer", rep.hoyer},
                {"l0_fraction", rep.l0_fraction},
                {"t_gauss", rep.t_gauss},
                {"t_lowpass", rep.t_lowpass},
                {"t_taylor", rep.t_taylor}};
}

void run_attack(const AttackArgs& a) {
    const auto model = load_model_checked(a.model);
    const Dataset data = load_dataset_checked(a.data);

    AttackConfig cfg;
    cfg.p = a.p;
    cfg.epsilon = a.epsilon;
    cfg.iterations = a.iterations;
    cfg.restarts = a.restarts;
    cfg.fixed_step = a.fixed_step;
    cfg.seed = a.seed;
    if (a.step == "classic")
        cfg.step_rule = StepRule::classic_fw;
    else if (a.step == "fixed")
        cfg.step_rule = StepRule::fixed;
    else
        throw std::invalid_argument("unknown step rule '" + a.step + "' (classic or fixed)");
    cfg.validate();

    MeasureOptions mopt;
    mopt.pixel_threshold = a.pixel_threshold;
    mopt.taylor_neighborhood = a.taylor_neighborhood;

    json out;
    out["model_id"] = file_stem(a.model);
    out["dataset_id"] = file_stem(a.data);
    out["p"] = a.p;
    out["epsilon"] = a.epsilon;
    out["seed"] = a.seed;

    if (a.index >= 0) {
        if (static_cast<std::size_t>(a.index) >= data.examples.size())
            throw std::invalid_argument(
                "--index " + std::to_string(a.index) + " is out of range (dataset holds " +
                std::to_string(data.examples.size()) + " examples)");
        // single-example run; the per-example seed convention matches the full
        // evaluation, so this reproduces example --index of an all-example run
        const auto& ex = data.examples[static_cast<std::size_t>(a.index)];
        AttackConfig local = cfg;
        local.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(a.index));
        const AttackResult r = attack(*model, ex.image, ex.label, local);

        ExampleReport rep;
        rep.index = static_cast<std::size_t>(a.index);
        rep.label = ex.label;
        rep.clean_prediction = r.clean_prediction;
        rep.adversarial_prediction = r.adversarial_prediction;
        rep.success = r.success;
        rep.lp_ratio =
            cfg.epsilon > 0.0 ? lp_norm(r.perturbation.delta, cfg.p) / cfg.epsilon : 0.0;
        std::vector<double> mag(r.perturbation.delta.size());
        bool any = false;
        for (std::size_t k = 0; k < mag.size(); ++k) {
            mag[k] = std::abs(r.perturbation.delta[k]);
            any = any || mag[k] > 0.0;
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        rep.sparsity_defined = any;
        rep.gini = any ? gini(mag) : nan;
        rep.hoyer = any ? hoyer(mag) : nan;
        rep.l0_fraction = l0_fraction(r.perturbation, mopt.pixel_threshold);
        rep.t_gauss = smoothness_t_c(r.perturbation, SmoothingOperator::gaussian,
                                     default_gaussian_schedule());
        rep.t_lowpass = smoothness_t_c(r.perturbation, SmoothingOperator::lowpass,
                                       default_lowpass_schedule(data.height(), data.width()));
        rep.t_taylor = taylor_smoothness(r.perturbation, mopt.taylor_neighborhood);
        std::cout << "example " << a.index << ": label " << rep.label << ", clean "
                  << rep.clean_prediction << " -> adversarial " << rep.adversarial_prediction
                  << (rep.success ? " (changed)" : " (unchanged)") << "\n"
                  << "  |delta|_p = " << format_g(lp_norm(r.perturbation.delta, a.p), 9)
                  << " (budget " << format_g(a.epsilon, 9) << ")\n"
                  << "  gini " << format_g(rep.gini, 6) << "  hoyer " << format_g(rep.hoyer, 6)
                  << "  l0_fraction " << format_g(rep.l0_fraction, 6) << "\n"
                  << "  t_gauss " << format_g(rep.t_gauss, 6) << "  t_lowpass "
                  << format_g(rep.t_lowpass, 6) << "  t_taylor " << format_g(rep.t_taylor, 6)
                  << "\n";
        out["example"] = example_json(rep);
        out["example"]["delta"] = r.perturbation.delta;
        out["example"]["loss_trace"] = r.loss_trace;
    } else {
        const EvaluationResult ev = evaluate_attack(*model, data, cfg, mopt, a.threads);
        std::cout << "attacked " << ev.examples.size() << " examples at p = " << format_g(a.p, 6)
                  << ", epsilon = " << format_g(a.epsilon, 9) << "\n"
                  << "  clean accuracy " << format_g(ev.clean_accuracy, 6)
                  << ", adversarial accuracy " << format_g(ev.adversarial_accuracy, 6)
                  << ", success rate " << format_g(ev.success_rate, 6) << "\n"
                  << "  mean gini " << format_g(ev.means.gini, 6) << ", hoyer "
                  << format_g(ev.means.hoyer, 6) << ", l0_fraction "
                  << format_g(ev.means.l0_fraction, 6) << " (" << ev.undefined_sparsity
                  << " undefined)\n"
                  << "  mean t_gauss " << format_g(ev.means.t_gauss, 6) << ", t_lowpass "
                  << format_g(ev.means.t_lowpass, 6) << ", t_taylor "
                  << format_g(ev.means.t_taylor, 6) << "\n"
                  << "  max |delta|_p / epsilon = " << format_g(ev.max_lp_ratio, 9) << "\n";
        out["clean_accuracy"] = ev.clean_accuracy;
        out["adversarial_accuracy"] = ev.adversarial_accuracy;
        out["success_rate"] = ev.success_rate;
        out["undefined_sparsity"] = ev.undefined_sparsity;
        out["max_lp_ratio"] = ev.max_lp_ratio;
        json examples = json::array();
        for (const auto& rep : ev.examples) {
            json e = example_json(rep);
            if (a.dump_deltas) {
                AttackConfig local = cfg;
                local.seed = mix_seed(cfg.seed, rep.index);
                const auto& ex = data.examples[rep.index];
                e["delta"] = attack(*model, ex.image, ex.label, local).perturbation.delta;
            }
            examples.push_back(std::move(e));
        }
        out["examples"] = std::move(examples);
    }
    if (!a.out.empty()) {
        write_file_atomic(a.out, out.dump(2) + "\n");
        std::cout << "wrote " << a.out << "\n";
    }
}

struct CalibrateArgs {
    std::string model, data, out;
    std::string grid = "default";
    int subset = 200;
    int iterations = 100, restarts = 1;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

void run_calibrate(const CalibrateArgs& a) {
    const auto model = load_model_checked(a.model);
    const Dataset data = load_dataset_checked(a.data);
    const auto grid = parse_grid(a.grid);

    CalibrationConfig cc;
    cc.subset_size = a.subset;
    cc.subset_seed = a.seed;
    AttackConfig tmpl;
    tmpl.iterations = a.iterations;
    tmpl.restarts = a.restarts;

    CalibrationTable table;
    table.model_id = file_stem(a.model);
    table.dataset_id = file_stem(a.data);
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        // same per-p seed stream as the sweep, so a standalone table matches
        // what the sweep would have calibrated internally
        tmpl.seed = mix_seed(a.seed, 0xca11b000ULL + gi);
        const auto r = calibrate_epsilon(*model, data, grid[gi], tmpl, cc, a.threads);
        std::cout << "p = " << format_g(r.p, 6) << ": epsilon = " << format_g(r.epsilon, 9)
                  << ", accuracy " << format_g(r.achieved_accuracy, 6) << " (target "
                  << format_g(r.target_accuracy, 6) << ")"
                  << (r.bracket_failed ? " [bracket failed]" : "") << "\n";
        table.entries.push_back(r);
    }
    save_calibration(table, a.out);
    std::cout << "wrote " << a.out << ": " << table.entries.size() << " budgets\n";
}

struct SweepArgs {
    std::string model, data;
    std::string grid = "default";
    std::string out_dir = "runs";
    std::string run_id;
    std::string calibration;
    std::string measures;
    std::uint64_t seed = 0;
    int iterations = 100, restarts = 1, subset = 200;
    unsigned threads = 1;
};

void run_sweep_command(const SweepArgs& a, const std::string& command_line) {
    if (!a.run_id.empty() && fs::exists(fs::path(a.out_dir) / a.run_id))
        throw std::runtime_error("run directory " + (fs::path(a.out_dir) / a.run_id).string() +
                                 " already exists (runs are append-only)");
    const auto model = load_model_checked(a.model);
    const Dataset data = load_dataset_checked(a.data);

    SweepConfig cfg;
    cfg.grid = parse_grid(a.grid);
    cfg.seed = a.seed;
    cfg.attack.iterations = a.iterations;
    cfg.attack.restarts = a.restarts;
    cfg.calibration.subset_size = a.subset;
    cfg.threads = a.threads;
    if (!a.measures.empty()) cfg.measures = parse_name_list(a.measures);
    if (!a.calibration.empty()) cfg.budgets = load_calibration(a.calibration);
    cfg.progress = [](std::size_t done, std::size_t total, double p) {
        std::cout << "  [" << done << "/" << total << "] p = " << format_g(p, 6) << "\n";
    };

    SweepResult res = run_sweep(*model, data, cfg);
    res.model_id = file_stem(a.model);
    res.dataset_id = file_stem(a.data);
    if (res.calibration.model_id.empty()) {
        res.calibration.model_id = res.model_id;
        res.calibration.dataset_id = res.dataset_id;
    }

    const std::string run_id =
        a.run_id.empty() ? default_run_id(res.model_id, res.dataset_id, a.seed) : a.run_id;
    const fs::path dir = create_run_directory(a.out_dir, run_id);
    write_measures_csv(res, dir / "measures.csv");
    write_optimal_p_json(res, dir / "optimal_p.json");
    save_calibration(res.calibration, dir / "calibration.json");
    fs::create_directory(dir / "plots");
    write_file_atomic(dir / "plots" / "curves.svg", render_curves_svg(res));
    write_file_atomic(dir / "plots" / "optimal_p.svg",
                      render_optimal_p_svg(aggregate_sweeps({res}, GroupBy::model)));

    RunInfo info;
    info.run_id = run_id;
    info.command = command_line;
    info.seed = a.seed;
    info.model_id = res.model_id;
    info.dataset_id = res.dataset_id;
    json config_echo{{"grid", res.grid},
                     {"seed", a.seed},
                     {"iterations", a.iterations},
                     {"restarts", a.restarts},
                     {"subset", a.subset},
                     {"threads", a.threads},
                     {"measures", cfg.measures.empty() ? all_measure_names() : cfg.measures},
                     {"calibration_file", a.calibration}};
    write_manifest(dir, info, config_echo,
                   {"measures.csv", "optimal_p.json", "calibration.json", "plots/curves.svg",
                    "plots/optimal_p.svg"});

    std::cout << "run " << dir.string() << ": beta_opt = " << format_g(res.beta_opt, 6)
              << ", optimal p set = " << format_p_set(res.optimal_p_set) << " (midpoint "
              << format_g(res.optimal_p_mid(), 6) << ")\n";
}

struct ReportArgs {
    std::vector<std::string> runs;
    std::string group_by = "model";
    std::string out_dir = "report";
};

void run_report(const ReportArgs& a) {
    GroupBy group_by;
    if (a.group_by == "model")
        group_by = GroupBy::model;
    else if (a.group_by == "dataset")
        group_by = GroupBy::dataset;
    else
        throw std::invalid_argument("unknown group '" + a.group_by + "' (model or dataset)");

    std::vector<SweepResult> results;
    for (const auto& run : a.runs) {
        const RunSummary s = load_run_summary(run);
        SweepResult r;
        r.model_id = s.info.model_id;
        r.dataset_id = s.info.dataset_id;
        r.seed = s.info.seed;
        r.beta_opt = s.beta_opt;
        r.optimal_p_set = s.optimal_p_set;
        results.push_back(std::move(r));
        std::cout << s.info.run_id << ": model " << s.info.model_id << ", data "
                  << s.info.dataset_id << ", beta_opt " << format_g(s.beta_opt, 6)
                  << ", optimal p " << format_p_set(s.optimal_p_set) << "\n";
    }

    const auto groups = aggregate_sweeps(results, group_by);
    if (groups.empty()) {
        std::cerr << "warning: no runs to aggregate, skipping the chart\n";
        return;
    }
    for (const auto& g : groups)
        std::cout << "group " << g.key << ": optimal p " << format_g(g.mean_p, 6) << " +/- "
                  << format_g(g.std_p, 6) << " over " << g.optimal_ps.size() << " run(s)\n";

    fs::create_directories(a.out_dir);
    const fs::path chart = fs::path(a.out_dir) / "optimal_p.svg";
    write_file_atomic(chart, render_optimal_p_svg(groups));
    std::cout << "wrote " << chart.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    std::string command_line;
    for (int i = 0; i < argc; ++i) {
        if (i) command_line += ' ';
        command_line += argv[i];
    }

    CLI::App app{"lp-budget adversarial attacks with sparsity/smoothness sweeps"};
    app.require_subcommand(1);

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic labeled dataset");
    gen_cmd->add_option("--out", gen.out, "output dataset file")->required();
    gen_cmd->add_option("--split", gen.split, "train or test")->capture_default_str();
    gen_cmd->add_option("--classes", gen.classes, "number of classes")->capture_default_str();
    gen_cmd->add_option("--height", gen.height)->capture_default_str();
    gen_cmd->add_option("--width", gen.width)->capture_default_str();
    gen_cmd->add_option("--channels", gen.channels)->capture_default_str();
    gen_cmd->add_option("--per-class", gen.per_class, "examples per class")
        ->capture_default_str();
    gen_cmd->add_option("--noise", gen.noise, "uniform noise amplitude")->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
    gen_cmd->callback([&] { run_gen_data(gen); });

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "train a classifier checkpoint");
    train_cmd->add_option("--data", tr.data, "training dataset")->required();
    train_cmd->add_option("--out", tr.out, "output checkpoint file")->required();
    train_cmd->add_option("--arch", tr.arch, "mlp or conv")->capture_default_str();
    train_cmd->add_option("--hidden", tr.hidden, "mlp hidden layer widths")
        ->delimiter(',')
        ->capture_default_str();
    train_cmd->add_option("--filters1", tr.filters1, "conv stage-1 filters")
        ->capture_default_str();
    train_cmd->add_option("--filters2", tr.filters2, "conv stage-2 filters")
        ->capture_default_str();
    train_cmd->add_option("--epochs", tr.epochs)->capture_default_str();
    train_cmd->add_option("--batch", tr.batch)->capture_default_str();
    train_cmd->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
    train_cmd->add_option("--seed", tr.seed)->capture_default_str();
    train_cmd->add_flag("--adversarial", tr.adversarial,
                        "replace part of each batch with lp attacks");
    train_cmd->add_option("--fraction", tr.fraction, "adversarial share of each batch")
        ->capture_default_str();
    train_cmd->add_option("--p-min", tr.p_min)->capture_default_str();
    train_cmd->add_option("--p-max", tr.p_max)->capture_default_str();
    train_cmd->add_option("--epsilon0", tr.epsilon0, "fallback l2-equivalent budget")
        ->capture_default_str();
    train_cmd->add_option("--attack-iterations", tr.attack_iterations)->capture_default_str();
    train_cmd->add_option("--budgets", tr.budgets, "calibration json with per-p budgets");
    train_cmd->callback([&] { run_train(tr); });

    AttackArgs at;
    auto* attack_cmd = app.add_subcommand("attack", "attack a dataset under an lp budget");
    attack_cmd->add_option("--model", at.model, "model checkpoint")->required();
    attack_cmd->add_option("--data", at.data, "dataset file")->required();
    attack_cmd->add_option("--p", at.p, "norm parameter in [1,2]")->required();
    attack_cmd->add_option("--epsilon", at.epsilon, "lp budget")->required();
    attack_cmd->add_option("--index", at.index, "attack a single example");
    attack_cmd->add_option("--iterations", at.iterations)->capture_default_str();
    attack_cmd->add_option("--restarts", at.restarts)->capture_default_str();
    attack_cmd->add_option("--step", at.step, "classic or fixed")->capture_default_str();
    attack_cmd->add_option("--fixed-step", at.fixed_step)->capture_default_str();
    attack_cmd->add_option("--seed", at.seed)->capture_default_str();
    attack_cmd->add_option("--threads", at.threads)->capture_default_str();
    attack_cmd->add_option("--pixel-threshold", at.pixel_threshold,
                           "per-channel magnitude below which a pixel counts as untouched")
        ->capture_default_str();
    attack_cmd->add_option("--taylor-neighborhood", at.taylor_neighborhood, "4 or 8")
        ->capture_default_str();
    attack_cmd->add_flag("--dump-deltas", at.dump_deltas,
                         "include every perturbation in the json output");
    attack_cmd->add_option("--out", at.out, "write a json report here");
    attack_cmd->callback([&] { run_attack(at); });

    CalibrateArgs ca;
    auto* cal_cmd = app.add_subcommand("calibrate", "find per-p budgets hitting clean/3");
    cal_cmd->add_option("--model", ca.model, "model checkpoint")->required();
    cal_cmd->add_option("--data", ca.data, "dataset file")->required();
    cal_cmd->add_option("--out", ca.out, "output calibration json")->required();
    cal_cmd->add_option("--grid", ca.grid, "'default' or comma-separated p values")
        ->capture_default_str();
    cal_cmd->add_option("--subset", ca.subset, "calibration subset size")->capture_default_str();
    cal_cmd->add_option("--iterations", ca.iterations, "attack iterations per probe")
        ->capture_default_str();
    cal_cmd->add_option("--restarts", ca.restarts)->capture_default_str();
    cal_cmd->add_option("--seed", ca.seed)->capture_default_str();
    cal_cmd->add_option("--threads", ca.threads)->capture_default_str();
    cal_cmd->callback([&] { run_calibrate(ca); });

    SweepArgs sw;
    auto* sweep_cmd = app.add_subcommand("sweep", "run the full p-grid experiment");
    sweep_cmd->add_option("--model", sw.model, "model checkpoint")->required();
    sweep_cmd->add_option("--data", sw.data, "dataset file")->required();
    sweep_cmd->add_option("--grid", sw.grid, "'default' or comma-separated p values")
        ->capture_default_str();
    sweep_cmd->add_option("--out-dir", sw.out_dir, "base directory for run outputs")
        ->capture_default_str();
    sweep_cmd->add_option("--run-id", sw.run_id, "run directory name (default: generated)");
    sweep_cmd->add_option("--calibration", sw.calibration,
                          "reuse budgets from this calibration json");
    sweep_cmd->add_option("--measures", sw.measures,
                          "comma-separated subset of "
                          "gini,hoyer,l0_fraction,t_gauss,t_lowpass,t_taylor");
    sweep_cmd->add_option("--seed", sw.seed)->capture_default_str();
    sweep_cmd->add_option("--iterations", sw.iterations, "attack iterations")
        ->capture_default_str();
    sweep_cmd->add_option("--restarts", sw.restarts)->capture_default_str();
    sweep_cmd->add_option("--subset", sw.subset, "calibration subset size")
        ->capture_default_str();
    sweep_cmd->add_option("--threads", sw.threads)->capture_default_str();
    sweep_cmd->callback([&] { run_sweep_command(sw, command_line); });

    ReportArgs re;
    auto* report_cmd = app.add_subcommand("report", "summarize and chart completed runs");
    report_cmd->add_option("runs", re.runs, "run directories to aggregate");
    report_cmd->add_option("--group-by", re.group_by, "model or dataset")
        ->capture_default_str();
    report_cmd->add_option("--out-dir", re.out_dir, "chart output directory")
        ->capture_default_str();
    report_cmd->callback([&] { run_report(re); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        app.exit(e);  // prints the offending token
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
