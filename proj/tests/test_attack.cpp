#include <doctest.h>

#include <cmath>
#include <vector>

#include "lpattack/attack.hpp"
#include "lpattack/lp_geometry.hpp"
#include "lpattack/model.hpp"
#include "lpattack/synthetic.hpp"
#include "lpattack/util.hpp"

using namespace lpa;

namespace {

struct Fixture {
    Dataset data;
    MlpModel model;

    Fixture()
        : data(make_data()), model(make_config(), 7) {
        TrainConfig tc;
        tc.epochs = 15;
        tc.batch_size = 8;
        tc.learning_rate = 5e-3;
        tc.seed = 3;
        train(model, data, tc);
    }

    static Dataset make_data() {
        SyntheticConfig cfg;
        cfg.height = 8;
        cfg.width = 8;
        cfg.channels = 1;
        cfg.num_classes = 3;
        cfg.samples_per_class = 10;
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

AttackConfig base_config(double p, double eps, int iters = 30) {
    AttackConfig cfg;
    cfg.p = p;
    cfg.epsilon = eps;
    cfg.iterations = iters;
    cfg.seed = 99;
    return cfg;
}

}  // namespace

TEST_CASE("attack config validation") {
    AttackConfig cfg = base_config(1.5, 0.5);
    CHECK_NOTHROW(cfg.validate());
    cfg.p = 0.9;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = base_config(2.5, 0.5);
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = base_config(1.5, -0.1);
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = base_config(1.5, 0.5, 0);
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = base_config(1.5, 0.5);
    cfg.restarts = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = base_config(1.5, 0.5);
    cfg.step_rule = StepRule::fixed;
    cfg.fixed_step = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE_FIXTURE(Fixture, "attack keeps the perturbation feasible") {
    for (const double p : {1.0, 1.3, 1.7, 2.0}) {
        const auto& ex = data.examples[1];
        const auto res = attack(model, ex.image, ex.label, base_config(p, 0.8));
        const double norm = lp_norm(res.perturbation.delta, p);
        CHECK(norm <= 0.8 * (1.0 + 1e-9));
        for (std::size_t i = 0; i < res.perturbation.delta.size(); ++i) {
            const double y = ex.image.data[i] + res.perturbation.delta[i];
            CHECK(y >= 0.0);
            CHECK(y <= 1.0);
        }
    }
}

TEST_CASE_FIXTURE(Fixture, "the best loss dominates the trace and the clean loss") {
    for (const double p : {1.0, 1.5}) {
        const auto& ex = data.examples[2];
        const auto res = attack(model, ex.image, ex.label, base_config(p, 0.6));
        REQUIRE(res.loss_trace.size() == 30);
        CHECK(res.best_loss >= res.clean_loss);
        for (double l : res.loss_trace) CHECK(res.best_loss >= l - 1e-12);
        // trace starts at the zero perturbation = clean loss
        CHECK(res.loss_trace.front() == doctest::Approx(res.clean_loss));
    }
}

TEST_CASE_FIXTURE(Fixture, "attack is deterministic for a fixed seed") {
    const auto& ex = data.examples[3];
    const auto cfg = base_config(1.4, 0.7);
    const auto a = attack(model, ex.image, ex.label, cfg);
    const auto b = attack(model, ex.image, ex.label, cfg);
    CHECK(a.perturbation.delta == b.perturbation.delta);
    CHECK(a.best_loss == b.best_loss);
    CHECK(a.loss_trace == b.loss_trace);
}

TEST_CASE_FIXTURE(Fixture, "zero budget attack is a no-op with a single evaluation") {
    const auto& ex = data.examples[4];
    const auto res = attack(model, ex.image, ex.label, base_config(1.5, 0.0));
    CHECK(res.loss_trace.size() == 1);
    CHECK(res.best_loss == doctest::Approx(res.clean_loss));
    CHECK(res.success == false);
    for (double d : res.perturbation.delta) CHECK(d == 0.0);
}

TEST_CASE_FIXTURE(Fixture, "more budget never hurts the achieved loss (same seed)") {
    const auto& ex = data.examples[5];
    for (const double p : {1.0, 1.6}) {
        const auto small = attack(model, ex.image, ex.label, base_config(p, 0.1, 40));
        const auto big = attack(model, ex.image, ex.label, base_config(p, 1.2, 40));
        CHECK(big.best_loss >= small.best_loss - 1e-9);
    }
}

TEST_CASE_FIXTURE(Fixture, "restarts only improve the best loss") {
    const auto& ex = data.examples[6];
    auto cfg = base_config(1.5, 0.9, 20);
    const auto one = attack(model, ex.image, ex.label, cfg);
    cfg.restarts = 3;
    const auto three = attack(model, ex.image, ex.label, cfg);
    CHECK(three.best_loss >= one.best_loss - 1e-12);
}

TEST_CASE_FIXTURE(Fixture, "a large l2 budget flips most confident predictions") {
    int flips = 0, total = 0;
    for (int i = 0; i < 10; ++i) {
        const auto& ex = data.examples[i * 2];
        if (model.predict_class(ex.image) != ex.label) continue;  // only correct ones
        ++total;
        const auto res = attack(model, ex.image, ex.label, base_config(2.0, 3.0, 40));
        flips += res.success;
    }
    REQUIRE(total >= 5);
    CHECK(flips >= total - 1);  // allow one stubborn example
}

TEST_CASE_FIXTURE(Fixture, "fixed step rule works and differs from classic") {
    const auto& ex = data.examples[7];
    auto cfg = base_config(1.5, 0.8, 25);
    const auto classic = attack(model, ex.image, ex.label, cfg);
    cfg.step_rule = StepRule::fixed;
    cfg.fixed_step = 0.1;
    const auto fixed = attack(model, ex.image, ex.label, cfg);
    CHECK(lp_norm(fixed.perturbation.delta, 1.5) <= 0.8 * (1.0 + 1e-9));
    CHECK(classic.loss_trace != fixed.loss_trace);
}

TEST_CASE_FIXTURE(Fixture, "evaluate_attack aggregates are consistent") {
    const auto cfg = base_config(1.5, 0.8, 15);
    const auto eval = evaluate_attack(model, data, cfg);
    REQUIRE(eval.examples.size() == data.examples.size());

    int successes = 0, correct_clean = 0, correct_after = 0;
    for (const auto& ex : eval.examples) {
        successes += ex.success;
        correct_after += ex.correct_after;
        CHECK(ex.lp_ratio <= 1.0 + 1e-9);
    }
    for (const auto& ex : data.examples)
        correct_clean += model.predict_class(ex.image) == ex.label;
    const double n = static_cast<double>(data.examples.size());
    CHECK(eval.clean_accuracy == doctest::Approx(correct_clean / n));
    CHECK(eval.adversarial_accuracy == doctest::Approx(correct_after / n));
    CHECK(eval.success_rate == doctest::Approx(successes / n));
    CHECK(eval.max_lp_ratio <= 1.0 + 1e-9);

    // measure means respect the defined-only rule
    int defined = 0;
    double gini_sum = 0.0;
    for (const auto& ex : eval.examples)
        if (ex.sparsity_defined) {
            ++defined;
            gini_sum += ex.gini;
        }
    CHECK(eval.undefined_sparsity == static_cast<int>(eval.examples.size()) - defined);
    if (defined > 0) CHECK(eval.means.gini == doctest::Approx(gini_sum / defined));
}

TEST_CASE_FIXTURE(Fixture, "evaluate_attack is thread-count invariant") {
    const auto cfg = base_config(1.3, 0.6, 10);
    const auto a = evaluate_attack(model, data, cfg, {}, 1);
    const auto b = evaluate_attack(model, data, cfg, {}, 4);
    REQUIRE(a.examples.size() == b.examples.size());
    for (std::size_t i = 0; i < a.examples.size(); ++i) {
        CHECK(a.examples[i].lp_ratio == b.examples[i].lp_ratio);
        CHECK(a.examples[i].adversarial_prediction == b.examples[i].adversarial_prediction);
        CHECK(a.examples[i].gini == doctest::Approx(b.examples[i].gini));
    }
    CHECK(a.means.t_gauss == doctest::Approx(b.means.t_gauss));
}

TEST_CASE_FIXTURE(Fixture, "disabling measures leaves NaN placeholders") {
    auto cfg = base_config(1.5, 0.5, 8);
    MeasureOptions opts;
    opts.enabled = false;
    const auto eval = evaluate_attack(model, data, cfg, opts);
    for (const auto& ex : eval.examples) {
        CHECK(std::isnan(ex.gini));
        CHECK(std::isnan(ex.t_gauss));
    }
}

TEST_CASE("epsilon schedule: table interpolation and fallback") {
    EpsilonSchedule sched;
    sched.epsilon0 = 0.5;
    const std::size_t n = 64;

    // fallback: epsilon0 * n^(1/p - 1/2)
    CHECK(sched.epsilon_for(2.0, n) == doctest::Approx(0.5));
    CHECK(sched.epsilon_for(1.0, n) == doctest::Approx(0.5 * std::sqrt(64.0)));

    sched.table = {{1.0, 10.0}, {1.5, 4.0}, {2.0, 1.0}};
    CHECK(sched.epsilon_for(1.0, n) == doctest::Approx(10.0));
    CHECK(sched.epsilon_for(1.25, n) == doctest::Approx(7.0));  // linear in p
    CHECK(sched.epsilon_for(1.75, n) == doctest::Approx(2.5));
    CHECK_THROWS_AS(sched.epsilon_for(0.5, n), std::invalid_argument);
    CHECK_THROWS_AS(sched.epsilon_for(2.3, n), std::invalid_argument);

    // queries outside the table's p range clamp to the nearest entry
    sched.table = {{1.2, 5.0}, {1.8, 2.0}};
    CHECK(sched.epsilon_for(1.05, n) == doctest::Approx(5.0));
    CHECK(sched.epsilon_for(1.95, n) == doctest::Approx(2.0));
}

TEST_CASE_FIXTURE(Fixture, "FwAttackSource produces feasible nonzero perturbations") {
    AttackConfig base = base_config(2.0, 1.0, 10);
    EpsilonSchedule sched;
    sched.table = {{1.0, 2.0}, {2.0, 0.8}};
    FwAttackSource source(base, sched);
    const auto& ex = data.examples[8];
    const auto delta = source.perturb(model, ex.image, ex.label, 1.5, 1234);
    REQUIRE(delta.size() == ex.image.data.size());
    CHECK(lp_norm(delta, 1.5) <= 1.4 * (1.0 + 1e-9));  // interpolated budget
    CHECK(lp_norm(delta, 1.5) > 0.0);
}
