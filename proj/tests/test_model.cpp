#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <filesystem>
#include <vector>

#include "lpattack/dataset_io.hpp"
#include "lpattack/model.hpp"
#include "lpattack/synthetic.hpp"
#include "lpattack/util.hpp"

using namespace lpa;
namespace fs = std::filesystem;

namespace {

MlpConfig tiny_mlp_config() {
    MlpConfig cfg;
    cfg.height = 8;
    cfg.width = 8;
    cfg.channels = 1;
    cfg.hidden = {6};
    cfg.num_classes = 3;
    return cfg;
}

Dataset tiny_dataset(Split split = Split::train, int per_class = 8) {
    SyntheticConfig cfg;
    cfg.height = 8;
    cfg.width = 8;
    cfg.channels = 1;
    cfg.num_classes = 3;
    cfg.samples_per_class = per_class;
    cfg.split = split;
    return generate_synthetic(cfg, 42);
}

// central-difference check of dLoss/dx against the analytic gradient
void check_input_gradient(const GradientOracle& model, std::vector<double> x, int label,
                          int probes) {
    std::vector<double> grad(x.size(), 0.0);
    model.loss_and_input_gradient(x, label, grad);
    std::mt19937_64 rng(mix_seed(17, 0x67726164));
    const double h = 1e-5;
    for (int k = 0; k < probes; ++k) {
        const std::size_t i = rng_below(rng, x.size());
        const double keep = x[i];
        x[i] = keep + h;
        const double up = model.loss(x, label);
        x[i] = keep - h;
        const double down = model.loss(x, label);
        x[i] = keep;
        const double numeric = (up - down) / (2.0 * h);
        CHECK(grad[i] == doctest::Approx(numeric).epsilon(1e-3).scale(1.0));
    }
}

// same for dLoss/dtheta
void check_param_gradient(TrainableModel& model, std::span<const double> x, int label,
                          int probes) {
    std::vector<double> grad(model.parameters().size(), 0.0);
    model.accumulate_param_gradient(x, label, grad);
    std::mt19937_64 rng(mix_seed(18, 0x67726164));
    const double h = 1e-5;
    for (int k = 0; k < probes; ++k) {
        const std::size_t i = rng_below(rng, grad.size());
        const double keep = model.parameters()[i];
        model.parameters()[i] = keep + h;
        const double up = model.loss(x, label);
        model.parameters()[i] = keep - h;
        const double down = model.loss(x, label);
        model.parameters()[i] = keep;
        const double numeric = (up - down) / (2.0 * h);
        CHECK(grad[i] == doctest::Approx(numeric).epsilon(1e-3).scale(1.0));
    }
}

}  // namespace

TEST_CASE("zero-parameter model is uniform with zero input gradient") {
    MlpModel model(tiny_mlp_config(), 1);
    std::fill(model.parameters().begin(), model.parameters().end(), 0.0);
    const Image x = Image::constant(8, 8, 1, 0.4);

    const auto probs = model.predict_probs(x);
    REQUIRE(probs.size() == 3);
    for (double p : probs) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(model.loss(x.data, 0) == doctest::Approx(std::log(3.0)).epsilon(1e-12));

    std::vector<double> grad(64, 1.0);
    model.loss_and_input_gradient(x.data, 0, grad);
    for (double g : grad) CHECK(g == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("prediction ties break toward the lowest class index") {
    MlpModel model(tiny_mlp_config(), 1);
    std::fill(model.parameters().begin(), model.parameters().end(), 0.0);
    CHECK(model.predict_class(Image::constant(8, 8, 1, 0.5)) == 0);
}

TEST_CASE("mlp gradients match finite differences") {
    MlpConfig cfg = tiny_mlp_config();
    cfg.hidden = {7, 5};
    MlpModel model(cfg, 3);
    const Dataset d = tiny_dataset();
    check_input_gradient(model, d.examples[0].image.data, d.examples[0].label, 12);
    check_param_gradient(model, d.examples[1].image.data, d.examples[1].label, 16);
}

TEST_CASE("linear (no hidden layer) mlp gradients match finite differences") {
    MlpConfig cfg = tiny_mlp_config();
    cfg.hidden = {};
    MlpModel model(cfg, 4);
    const Dataset d = tiny_dataset();
    check_input_gradient(model, d.examples[2].image.data, d.examples[2].label, 8);
    check_param_gradient(model, d.examples[3].image.data, d.examples[3].label, 10);
}

TEST_CASE("conv gradients match finite differences") {
    ConvConfig cfg;
    cfg.height = 8;
    cfg.width = 8;
    cfg.channels = 1;
    cfg.filters1 = 3;
    cfg.filters2 = 4;
    cfg.num_classes = 3;
    ConvModel model(cfg, 5);
    const Dataset d = tiny_dataset();
    check_input_gradient(model, d.examples[5].image.data, d.examples[5].label, 12);
    check_param_gradient(model, d.examples[6].image.data, d.examples[6].label, 16);
}

TEST_CASE("model construction is seed deterministic") {
    MlpModel a(tiny_mlp_config(), 9), b(tiny_mlp_config(), 9), c(tiny_mlp_config(), 10);
    CHECK(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
    CHECK(!std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
}

TEST_CASE("training reduces the loss and reports honest stats") {
    MlpModel model(tiny_mlp_config(), 7);
    const Dataset d = tiny_dataset();
    TrainConfig tc;
    tc.epochs = 12;
    tc.batch_size = 8;
    tc.learning_rate = 5e-3;
    tc.seed = 11;
    int callbacks = 0;
    const TrainStats stats = train(model, d, tc, [&](int, double) { ++callbacks; });
    CHECK(stats.epochs_run == 12);
    CHECK(callbacks == 12);
    CHECK(stats.final_loss < stats.initial_loss);
    CHECK(stats.final_loss == doctest::Approx(mean_loss(model, d)).epsilon(1e-12));
    CHECK(accuracy(model, d) > 0.4);  // 3 classes, chance is 1/3
}

TEST_CASE("training with zero epochs is a no-op") {
    MlpModel model(tiny_mlp_config(), 7);
    const std::vector<double> before(model.parameters().begin(), model.parameters().end());
    TrainConfig tc;
    tc.epochs = 0;
    const TrainStats stats = train(model, tiny_dataset(), tc);
    CHECK(stats.epochs_run == 0);
    CHECK(std::equal(before.begin(), before.end(), model.parameters().begin()));
}

TEST_CASE("training is deterministic for a fixed seed") {
    const Dataset d = tiny_dataset();
    TrainConfig tc;
    tc.epochs = 4;
    tc.batch_size = 8;
    tc.seed = 21;
    MlpModel a(tiny_mlp_config(), 7), b(tiny_mlp_config(), 7);
    train(a, d, tc);
    train(b, d, tc);
    CHECK(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
}

TEST_CASE("train config validation") {
    TrainConfig tc;
    CHECK_NOTHROW(tc.validate());
    tc.batch_size = 0;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc = TrainConfig{};
    tc.learning_rate = -1.0;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc = TrainConfig{};
    tc.adversarial_fraction = 1.5;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc = TrainConfig{};
    tc.p_min = 1.5;
    tc.p_max = 1.2;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc = TrainConfig{};
    tc.epochs = -1;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
}

namespace {

/// Records the p values it is asked for and returns zero perturbations, so
/// adversarial_train with it must behave numerically like clean training on
/// the same batches.
struct RecordingSource final : AdversarialExampleSource {
    std::vector<double> seen_p;
    std::vector<double> perturb(const GradientOracle&, const Image& x, int, double p,
                                std::uint64_t) override {
        seen_p.push_back(p);
        return std::vector<double>(x.data.size(), 0.0);
    }
};

}  // namespace

TEST_CASE("adversarial_train with fraction 0 reproduces train exactly") {
    const Dataset d = tiny_dataset();
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 8;
    tc.seed = 31;
    MlpModel plain(tiny_mlp_config(), 7), adv(tiny_mlp_config(), 7);
    train(plain, d, tc);
    RecordingSource source;
    adversarial_train(adv, d, tc, source);
    CHECK(source.seen_p.empty());
    CHECK(std::equal(plain.parameters().begin(), plain.parameters().end(),
                     adv.parameters().begin()));
}

TEST_CASE("adversarial_train draws p uniformly from the configured interval") {
    const Dataset d = tiny_dataset(Split::train, 16);  // 48 examples
    TrainConfig tc;
    tc.epochs = 8;
    tc.batch_size = 8;
    tc.seed = 33;
    tc.adversarial_fraction = 0.5;
    tc.p_min = 1.0;
    tc.p_max = 2.0;
    MlpModel model(tiny_mlp_config(), 7);
    RecordingSource source;
    adversarial_train(model, d, tc, source);

    // floor(0.5 * 8) = 4 slots per batch, 6 batches, 8 epochs
    REQUIRE(source.seen_p.size() == 4 * 6 * 8);
    double mean = 0.0, lo = 2.0, hi = 1.0;
    for (double p : source.seen_p) {
        REQUIRE(p >= 1.0);
        REQUIRE(p <= 2.0);
        mean += p;
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    mean /= static_cast<double>(source.seen_p.size());
    CHECK(mean > 1.42);  // uniform mean 1.5 +- sampling noise
    CHECK(mean < 1.58);
    CHECK(lo < 1.15);
    CHECK(hi > 1.85);
}

TEST_CASE("checkpoints round trip byte for byte") {
    const auto dir = fs::temp_directory_path() / "lpa_model_test";
    fs::create_directories(dir);

    // train a little so the parameters are not fresh-init
    MlpConfig cfg = tiny_mlp_config();
    cfg.hidden = {5, 4};
    MlpModel model(cfg, 13);
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 8;
    train(model, tiny_dataset(), tc);

    const auto path = dir / "model.lpmd";
    save_model(model, path);
    const auto loaded = load_model(path);
    REQUIRE(loaded != nullptr);
    const auto* mlp = dynamic_cast<MlpModel*>(loaded.get());
    REQUIRE(mlp != nullptr);
    CHECK(mlp->config().hidden == cfg.hidden);
    CHECK(mlp->config().num_classes == cfg.num_classes);

    // float32 storage: params agree to float precision and a second save is
    // byte-identical
    const auto a = model.parameters();
    const auto b = loaded->parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(static_cast<float>(a[i]) == static_cast<float>(b[i]));
    const auto path2 = dir / "model2.lpmd";
    save_model(*loaded, path2);
    CHECK(read_file(path) == read_file(path2));

    // predictions survive the round trip
    const Dataset d = tiny_dataset(Split::test, 4);
    int agree = 0;
    for (const auto& ex : d.examples)
        agree += model.predict_class(ex.image) == loaded->predict_class(ex.image);
    CHECK(agree == static_cast<int>(d.examples.size()));
    fs::remove_all(dir);
}

TEST_CASE("conv checkpoints round trip") {
    const auto dir = fs::temp_directory_path() / "lpa_model_test2";
    fs::create_directories(dir);
    ConvConfig cfg;
    cfg.height = 8;
    cfg.width = 8;
    cfg.channels = 1;
    cfg.filters1 = 2;
    cfg.filters2 = 3;
    cfg.num_classes = 3;
    ConvModel model(cfg, 19);
    const auto path = dir / "conv.lpmd";
    save_model(model, path);
    const auto loaded = load_model(path);
    const auto* conv = dynamic_cast<ConvModel*>(loaded.get());
    REQUIRE(conv != nullptr);
    CHECK(conv->config().filters1 == 2);
    CHECK(conv->config().filters2 == 3);
    CHECK(conv->parameters().size() == model.parameters().size());
    fs::remove_all(dir);
}

TEST_CASE("checkpoint loader rejects malformed files") {
    const auto dir = fs::temp_directory_path() / "lpa_model_test3";
    fs::create_directories(dir);
    MlpModel model(tiny_mlp_config(), 13);
    const auto path = dir / "m.lpmd";
    save_model(model, path);
    const std::string blob = read_file(path);

    const auto variant = [&](const std::string& bytes) {
        const auto p = dir / "v.lpmd";
        write_file_atomic(p, bytes);
        return p;
    };

    std::string bad = blob;
    bad[0] = 'Q';
    CHECK_THROWS_AS(load_model(variant(bad)), MalformedHeader);
    bad = blob;
    bad[5] = 7;  // unknown architecture kind
    CHECK_THROWS_AS(load_model(variant(bad)), MalformedHeader);
    CHECK_THROWS_AS(load_model(variant(blob.substr(0, blob.size() - 3))), TruncatedFile);
    CHECK_THROWS_AS(load_model(variant(blob + "x")), MalformedHeader);
    fs::remove_all(dir);
}

TEST_CASE("a linear model separates linearly separable toy data") {
    // two constant-intensity classes: dark vs bright
    Dataset d;
    d.num_classes = 2;
    d.split = Split::train;
    for (int i = 0; i < 8; ++i) {
        d.examples.push_back({Image::constant(8, 8, 1, 0.15 + 0.01 * i), 0});
        d.examples.push_back({Image::constant(8, 8, 1, 0.75 + 0.01 * i), 1});
    }
    MlpConfig cfg;
    cfg.height = 8;
    cfg.width = 8;
    cfg.channels = 1;
    cfg.hidden = {};
    cfg.num_classes = 2;
    MlpModel model(cfg, 3);
    TrainConfig tc;
    tc.epochs = 60;
    tc.batch_size = 4;
    tc.learning_rate = 0.05;
    train(model, d, tc);
    CHECK(accuracy(model, d) == doctest::Approx(1.0));
}
