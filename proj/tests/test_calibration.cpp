#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "lpattack/calibration.hpp"
#include "lpattack/model.hpp"
#include "lpattack/synthetic.hpp"
#include "lpattack/util.hpp"

using namespace lpa;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    Dataset train_data, test_data;
    MlpModel model;

    Fixture()
        : train_data(make_data(Split::train, 12)),
          test_data(make_data(Split::test, 8)),
          model(make_config(), 7) {
        TrainConfig tc;
        tc.epochs = 20;
        tc.batch_size = 8;
        tc.learning_rate = 5e-3;
        tc.seed = 3;
        train(model, train_data, tc);
    }

    static Dataset make_data(Split split, int per_class) {
        SyntheticConfig cfg;
        cfg.height = 8;
        cfg.width = 8;
        cfg.channels = 1;
        cfg.num_classes = 3;
        cfg.samples_per_class = per_class;
        cfg.split = split;
        return generate_synthetic(cfg, 42);
    }
    static MlpConfig make_config() {
        MlpConfig cfg;
        cfg.height = 8;
        cfg.width = 8;
        cfg.channels = 1;
        cfg.hidden = {12};
        cfg.num_classes = 3;
        return cfg;
    }
};

AttackConfig attack_template() {
    AttackConfig cfg;
    cfg.iterations = 20;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE_FIXTURE(Fixture, "calibration hits the degradation target") {
    const auto res = calibrate_epsilon(model, test_data, 2.0, attack_template());
    CHECK(res.p == 2.0);
    CHECK(res.clean_accuracy > 0.5);  // the model actually learned something
    CHECK(res.target_accuracy == doctest::Approx(res.clean_accuracy / 3.0));
    REQUIRE(!res.bracket_failed);
    CHECK(res.achieved_accuracy <= res.target_accuracy + 1e-12);
    CHECK(res.epsilon > 0.0);
    CHECK(!res.trace.empty());

    // the chosen epsilon is the smallest probed one meeting the target
    for (const auto& probe : res.trace)
        if (probe.accuracy <= res.target_accuracy) CHECK(res.epsilon <= probe.epsilon + 1e-12);
}

TEST_CASE_FIXTURE(Fixture, "half the calibrated budget misses the target") {
    // "smallest epsilon" sanity: at epsilon/2 the attack must be noticeably
    // weaker than the target threshold
    const auto res = calibrate_epsilon(model, test_data, 1.5, attack_template());
    REQUIRE(!res.bracket_failed);

    AttackConfig weak = attack_template();
    weak.p = 1.5;
    weak.epsilon = res.epsilon / 2.0;
    MeasureOptions off;
    off.enabled = false;
    const auto eval = evaluate_attack(model, test_data, weak, off);
    CHECK(eval.adversarial_accuracy > res.target_accuracy);
}

TEST_CASE_FIXTURE(Fixture, "calibration is deterministic") {
    const auto a = calibrate_epsilon(model, test_data, 1.3, attack_template());
    const auto b = calibrate_epsilon(model, test_data, 1.3, attack_template());
    CHECK(a.epsilon == b.epsilon);
    CHECK(a.achieved_accuracy == b.achieved_accuracy);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i)
        CHECK(a.trace[i].epsilon == b.trace[i].epsilon);
}

TEST_CASE_FIXTURE(Fixture, "subset_size caps the working set") {
    CalibrationConfig cc;
    cc.subset_size = 6;
    const auto res = calibrate_epsilon(model, test_data, 2.0, attack_template(), cc);
    // accuracies are multiples of 1/6 on a 6-example subset
    const double scaled = res.clean_accuracy * 6.0;
    CHECK(scaled == doctest::Approx(std::round(scaled)).epsilon(1e-9));
}

TEST_CASE("calibration rejects a model with zero clean accuracy") {
    // an untrained (zero-parameter) model predicts class 0 for everything;
    // craft a dataset whose labels are never 0
    SyntheticConfig cfg;
    cfg.height = 8;
    cfg.width = 8;
    cfg.channels = 1;
    cfg.num_classes = 3;
    cfg.samples_per_class = 4;
    cfg.split = Split::test;
    Dataset data = generate_synthetic(cfg, 1);
    data.examples.erase(data.examples.begin(), data.examples.begin() + 4);  // drop class 0

    MlpConfig mc;
    mc.height = 8;
    mc.width = 8;
    mc.channels = 1;
    mc.hidden = {};
    mc.num_classes = 3;
    MlpModel model(mc, 2);
    std::fill(model.parameters().begin(), model.parameters().end(), 0.0);

    CHECK_THROWS_AS(calibrate_epsilon(model, data, 2.0, attack_template()),
                    std::invalid_argument);
}

TEST_CASE("calibration config validation") {
    CalibrationConfig cc;
    CHECK_NOTHROW(cc.validate());
    cc.subset_size = 0;
    CHECK_THROWS_AS(cc.validate(), std::invalid_argument);
    cc = CalibrationConfig{};
    cc.max_doublings = 0;
    CHECK_THROWS_AS(cc.validate(), std::invalid_argument);
    cc = CalibrationConfig{};
    cc.rel_width_stop = 0.0;
    CHECK_THROWS_AS(cc.validate(), std::invalid_argument);
}

TEST_CASE("calibration tables round trip through json") {
    CalibrationTable table;
    table.model_id = "toy-model";
    table.dataset_id = "toy-data";
    for (int i = 0; i < 3; ++i) {
        CalibrationResult r;
        r.p = 1.0 + 0.5 * i;
        r.epsilon = 2.0 / (i + 1);
        r.achieved_accuracy = 0.2 + 0.01 * i;
        r.target_accuracy = 0.3;
        r.clean_accuracy = 0.9;
        r.bracket_failed = i == 2;
        r.trace = {{0.5, 0.8}, {1.0, 0.4}};
        table.entries.push_back(r);
    }

    const auto dir = fs::temp_directory_path() / "lpa_calib_test";
    fs::create_directories(dir);
    const auto path = dir / "budgets.json";
    save_calibration(table, path);
    const auto back = load_calibration(path);

    CHECK(back.model_id == "toy-model");
    CHECK(back.dataset_id == "toy-data");
    REQUIRE(back.entries.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.entries[i].p == doctest::Approx(table.entries[i].p));
        CHECK(back.entries[i].epsilon == doctest::Approx(table.entries[i].epsilon));
        CHECK(back.entries[i].bracket_failed == table.entries[i].bracket_failed);
    }

    const auto pairs = back.budget_pairs();
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].first == doctest::Approx(1.0));
    CHECK(pairs[0].second == doctest::Approx(2.0));

    // corrupt json and wrong-order entries are rejected
    write_file_atomic(path, "{not json");
    CHECK_THROWS_AS(load_calibration(path), MalformedHeader);
    write_file_atomic(path,
                      R"({"model_id":"m","dataset_id":"d","entries":[)"
                      R"({"p":2.0,"epsilon":1.0,"achieved":0.1,"target":0.2,"clean":0.6,"bracket_failed":false},)"
                      R"({"p":1.0,"epsilon":2.0,"achieved":0.1,"target":0.2,"clean":0.6,"bracket_failed":false}]})");
    CHECK_THROWS_AS(load_calibration(path), ValueOutOfRange);
    fs::remove_all(dir);
}
