// Python bindings: numpy in, numpy out. Images are (H, W, C) float arrays in
// [0,1]; datasets are (N, H, W, C) plus an (N,) label vector.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <stdexcept>
#include <vector>

#include "lpattack/attack.hpp"
#include "lpattack/calibration.hpp"
#include "lpattack/dataset_io.hpp"
#include "lpattack/lp_geometry.hpp"
#include "lpattack/model.hpp"
#include "lpattack/smoothness.hpp"
#include "lpattack/sparsity.hpp"
#include "lpattack/sweep.hpp"
#include "lpattack/synthetic.hpp"
#include "lpattack/types.hpp"

namespace py = pybind11;
using namespace lpa;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<long, py::array::c_style | py::array::forcecast>;

std::vector<double> as_vector(const DoubleArray& arr) {
    return {arr.data(), arr.data() + arr.size()};
}

Image as_image(const DoubleArray& arr) {
    if (arr.ndim() != 3)
        throw std::invalid_argument("expected an image array of shape (H, W, C)");
    return Image(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
                 static_cast<int>(arr.shape(2)), as_vector(arr));
}

Dataset as_dataset(const DoubleArray& images, const LabelArray& labels, int num_classes,
                   const std::string& split) {
    if (images.ndim() != 4)
        throw std::invalid_argument("expected a dataset array of shape (N, H, W, C)");
    if (labels.ndim() != 1 || labels.shape(0) != images.shape(0))
        throw std::invalid_argument("labels must be a vector with one entry per image");
    Dataset data;
    data.num_classes = num_classes;
    data.split = split_from_string(split);
    const auto h = static_cast<int>(images.shape(1));
    const auto w = static_cast<int>(images.shape(2));
    const auto c = static_cast<int>(images.shape(3));
    const std::size_t stride = static_cast<std::size_t>(h) * w * c;
    data.examples.reserve(static_cast<std::size_t>(images.shape(0)));
    for (py::ssize_t i = 0; i < images.shape(0); ++i) {
        const double* base = images.data() + static_cast<std::size_t>(i) * stride;
        data.examples.push_back(
            {Image(h, w, c, {base, base + stride}), static_cast<int>(labels.at(i))});
    }
    data.validate();
    return data;
}

py::array_t<double> image_array(const std::vector<double>& values, int h, int w, int c) {
    py::array_t<double> out({h, w, c});
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

py::tuple dataset_arrays(const Dataset& data) {
    const int h = data.height(), w = data.width(), c = data.channels();
    const auto n = static_cast<py::ssize_t>(data.examples.size());
    py::array_t<double> images({n, static_cast<py::ssize_t>(h), static_cast<py::ssize_t>(w),
                                static_cast<py::ssize_t>(c)});
    py::array_t<long> labels(n);
    const std::size_t stride = static_cast<std::size_t>(h) * w * c;
    for (py::ssize_t i = 0; i < n; ++i) {
        const auto& ex = data.examples[static_cast<std::size_t>(i)];
        std::copy(ex.image.data.begin(), ex.image.data.end(),
                  images.mutable_data() + static_cast<std::size_t>(i) * stride);
        labels.mutable_at(i) = ex.label;
    }
    return py::make_tuple(images, labels);
}

AttackConfig make_attack_config(double p, double epsilon, int iterations, int restarts,
                                std::uint64_t seed, const std::string& step,
                                double fixed_step) {
    AttackConfig cfg;
    cfg.p = p;
    cfg.epsilon = epsilon;
    cfg.iterations = iterations;
    cfg.restarts = restarts;
    cfg.seed = seed;
    cfg.fixed_step = fixed_step;
    if (step == "classic")
        cfg.step_rule = StepRule::classic_fw;
    else if (step == "fixed")
        cfg.step_rule = StepRule::fixed;
    else
        throw std::invalid_argument("step must be 'classic' or 'fixed'");
    return cfg;
}

Perturbation as_perturbation(const DoubleArray& delta) {
    if (delta.ndim() != 3)
        throw std::invalid_argument("expected a perturbation array of shape (H, W, C)");
    Perturbation pert;
    pert.delta = as_vector(delta);
    pert.height = static_cast<int>(delta.shape(0));
    pert.width = static_cast<int>(delta.shape(1));
    pert.channels = static_cast<int>(delta.shape(2));
    return pert;
}

// Owns a trainable model; exposed to python as Model.
struct PyModel {
    std::unique_ptr<TrainableModel> model;

    TrainableModel& ref() {
        if (!model) throw std::runtime_error("model has been moved away");
        return *model;
    }
    const TrainableModel& ref() const {
        if (!model) throw std::runtime_error("model has been moved away");
        return *model;
    }
};

}  // namespace

PYBIND11_MODULE(_lpattack, m) {
    m.doc() = "lp-budget adversarial attacks with sparsity and smoothness measures";

    py::register_exception<ValueOutOfRange>(m, "ValueOutOfRange", PyExc_ValueError);
    py::register_exception<MalformedHeader>(m, "MalformedHeader", PyExc_ValueError);
    py::register_exception<TruncatedFile>(m, "TruncatedFile", PyExc_ValueError);
    py::register_exception<UndefinedSparsity>(m, "UndefinedSparsity", PyExc_ValueError);

    // ---- data ----------------------------------------------------------
    m.def(
        "generate_dataset",
        [](int height, int width, int channels, int num_classes, int samples_per_class,
           double noise, const std::string& split, std::uint64_t seed) {
            SyntheticConfig cfg;
            cfg.height = height;
            cfg.width = width;
            cfg.channels = channels;
            cfg.num_classes = num_classes;
            cfg.samples_per_class = samples_per_class;
            cfg.noise_amplitude = noise;
            cfg.split = split_from_string(split);
            return dataset_arrays(generate_synthetic(cfg, seed));
        },
        py::arg("height") = 16, py::arg("width") = 16, py::arg("channels") = 3,
        py::arg("num_classes") = 4, py::arg("samples_per_class") = 50,
        py::arg("noise") = 0.1, py::arg("split") = "train", py::arg("seed") = 0,
        "Deterministic synthetic grating dataset as (images, labels) arrays.");

    m.def(
        "save_dataset",
        [](const std::filesystem::path& path, const DoubleArray& images,
           const LabelArray& labels, int num_classes, const std::string& split) {
            save_dataset(as_dataset(images, labels, num_classes, split), path);
        },
        py::arg("path"), py::arg("images"), py::arg("labels"), py::arg("num_classes"),
        py::arg("split") = "train");

    m.def(
        "load_dataset",
        [](const std::filesystem::path& path) {
            const Dataset data = load_dataset(path);
            auto arrays = dataset_arrays(data);
            return py::make_tuple(arrays[0], arrays[1], data.num_classes,
                                  std::string(to_string(data.split)));
        },
        py::arg("path"), "Returns (images, labels, num_classes, split).");

    // ---- models ---------------------------------------------------------
    py::class_<PyModel>(m, "Model")
        .def_static(
            "mlp",
            [](int height, int width, int channels, const std::vector<int>& hidden,
               int num_classes, std::uint64_t seed) {
                MlpConfig cfg;
                cfg.height = height;
                cfg.width = width;
                cfg.channels = channels;
                cfg.hidden = hidden;
                cfg.num_classes = num_classes;
                return PyModel{std::make_unique<MlpModel>(cfg, seed)};
            },
            py::arg("height") = 16, py::arg("width") = 16, py::arg("channels") = 3,
            py::arg("hidden") = std::vector<int>{64}, py::arg("num_classes") = 4,
            py::arg("seed") = 0)
        .def_static(
            "conv",
            [](int height, int width, int channels, int filters1, int filters2,
               int num_classes, std::uint64_t seed) {
                ConvConfig cfg;
                cfg.height = height;
                cfg.width = width;
                cfg.channels = channels;
                cfg.filters1 = filters1;
                cfg.filters2 = filters2;
                cfg.num_classes = num_classes;
                return PyModel{std::make_unique<ConvModel>(cfg, seed)};
            },
            py::arg("height") = 16, py::arg("width") = 16, py::arg("channels") = 3,
            py::arg("filters1") = 8, py::arg("filters2") = 8, py::arg("num_classes") = 4,
            py::arg("seed") = 0)
        .def_static("load",
                    [](const std::filesystem::path& path) { return PyModel{load_model(path)}; },
                    py::arg("path"))
        .def("save",
             [](const PyModel& self, const std::filesystem::path& path) {
                 save_model(self.ref(), path);
             },
             py::arg("path"))
        .def_property_readonly("num_classes",
                               [](const PyModel& self) { return self.ref().num_classes(); })
        .def_property_readonly("input_shape",
                               [](const PyModel& self) {
                                   return py::make_tuple(self.ref().input_height(),
                                                         self.ref().input_width(),
                                                         self.ref().input_channels());
                               })
        .def("logits",
             [](const PyModel& self, const DoubleArray& image) {
                 return self.ref().logits(as_image(image).data);
             })
        .def("predict_probs",
             [](const PyModel& self, const DoubleArray& image) {
                 return self.ref().predict_probs(as_image(image));
             })
        .def("predict_class",
             [](const PyModel& self, const DoubleArray& image) {
                 return self.ref().predict_class(as_image(image));
             })
        .def(
            "input_gradient",
            [](const PyModel& self, const DoubleArray& image, int label) {
                const Image img = as_image(image);
                return image_array(self.ref().input_gradient(img, label), img.height,
                                   img.width, img.channels);
            },
            py::arg("image"), py::arg("label"))
        .def(
            "fit",
            [](PyModel& self, const DoubleArray& images, const LabelArray& labels,
               int epochs, int batch_size, double learning_rate, std::uint64_t seed) {
                const Dataset data = as_dataset(images, labels, self.ref().num_classes(),
                                                "train");
                TrainConfig cfg;
                cfg.epochs = epochs;
                cfg.batch_size = batch_size;
                cfg.learning_rate = learning_rate;
                cfg.seed = seed;
                const TrainStats stats = train(self.ref(), data, cfg);
                return py::dict(py::arg("initial_loss") = stats.initial_loss,
                                py::arg("final_loss") = stats.final_loss,
                                py::arg("epochs_run") = stats.epochs_run);
            },
            py::arg("images"), py::arg("labels"), py::arg("epochs") = 10,
            py::arg("batch_size") = 32, py::arg("learning_rate") = 1e-3, py::arg("seed") = 0)
        .def(
            "accuracy",
            [](const PyModel& self, const DoubleArray& images, const LabelArray& labels) {
                return accuracy(self.ref(),
                                as_dataset(images, labels, self.ref().num_classes(), "test"));
            },
            py::arg("images"), py::arg("labels"));

    // ---- geometry -------------------------------------------------------
    m.def(
        "lp_norm", [](const DoubleArray& v, double p) { return lp_norm(as_vector(v), p); },
        py::arg("v"), py::arg("p"));
    m.def(
        "lmo_lp_box",
        [](const DoubleArray& w, const DoubleArray& x, double eps, double p) {
            const auto sol = lmo_lp_box(as_vector(w), as_vector(x), eps, p);
            return py::dict(py::arg("delta") = sol.delta, py::arg("mu_star") = sol.mu_star,
                            py::arg("objective") = sol.objective);
        },
        py::arg("w"), py::arg("x"), py::arg("eps"), py::arg("p"),
        "Maximize <w, delta> over the lp ball intersected with the image box.");
    m.def(
        "project_l1_box",
        [](const DoubleArray& v, const DoubleArray& x, double eps) {
            return project_l1_box(as_vector(v), as_vector(x), eps);
        },
        py::arg("v"), py::arg("x"), py::arg("eps"));

    // ---- measures -------------------------------------------------------
    m.def("gini", [](const DoubleArray& c) { return gini(as_vector(c)); }, py::arg("c"));
    m.def("hoyer", [](const DoubleArray& c) { return hoyer(as_vector(c)); }, py::arg("c"));
    m.def(
        "l0_fraction",
        [](const DoubleArray& delta, double threshold) {
            return l0_fraction(as_perturbation(delta), threshold);
        },
        py::arg("delta"), py::arg("threshold") = 0.0);
    m.def(
        "t_gauss",
        [](const DoubleArray& delta) {
            return smoothness_t_c(as_perturbation(delta), SmoothingOperator::gaussian,
                                  default_gaussian_schedule());
        },
        py::arg("delta"));
    m.def(
        "t_lowpass",
        [](const DoubleArray& delta) {
            const Perturbation pert = as_perturbation(delta);
            return smoothness_t_c(pert, SmoothingOperator::lowpass,
                                  default_lowpass_schedule(pert.height, pert.width));
        },
        py::arg("delta"));
    m.def(
        "t_taylor",
        [](const DoubleArray& delta, int neighborhood) {
            return taylor_smoothness(as_perturbation(delta), neighborhood);
        },
        py::arg("delta"), py::arg("neighborhood") = 4);

    // ---- attacks and the p sweep ----------------------------------------
    m.def(
        "attack",
        [](const PyModel& model, const DoubleArray& image, int label, double p, double epsilon,
           int iterations, int restarts, std::uint64_t seed, const std::string& step,
           double fixed_step) {
            const Image img = as_image(image);
            const AttackResult r =
                attack(model.ref(), img, label,
                       make_attack_config(p, epsilon, iterations, restarts, seed, step,
                                          fixed_step));
            return py::dict(
                py::arg("delta") =
                    image_array(r.perturbation.delta, img.height, img.width, img.channels),
                py::arg("success") = r.success,
                py::arg("clean_prediction") = r.clean_prediction,
                py::arg("adversarial_prediction") = r.adversarial_prediction,
                py::arg("clean_loss") = r.clean_loss, py::arg("best_loss") = r.best_loss,
                py::arg("loss_trace") = r.loss_trace);
        },
        py::arg("model"), py::arg("image"), py::arg("label"), py::arg("p"), py::arg("epsilon"),
        py::arg("iterations") = 100, py::arg("restarts") = 1, py::arg("seed") = 0,
        py::arg("step") = "classic", py::arg("fixed_step") = 0.05,
        "Best-loss lp-budget perturbation of one image.");

    m.def(
        "evaluate_attack",
        [](const PyModel& model, const DoubleArray& images, const LabelArray& labels,
           double p, double epsilon, int iterations, int restarts, std::uint64_t seed,
           unsigned threads, double pixel_threshold, int taylor_neighborhood) {
            const Dataset data =
                as_dataset(images, labels, model.ref().num_classes(), "test");
            MeasureOptions opts;
            opts.pixel_threshold = pixel_threshold;
            opts.taylor_neighborhood = taylor_neighborhood;
            const EvaluationResult ev = evaluate_attack(
                model.ref(), data,
                make_attack_config(p, epsilon, iterations, restarts, seed, "classic", 0.05),
                opts, threads);
            py::list successes, ginis;
            for (const auto& e : ev.examples) {
                successes.append(e.success);
                ginis.append(e.gini);
            }
            return py::dict(py::arg("clean_accuracy") = ev.clean_accuracy,
                            py::arg("adversarial_accuracy") = ev.adversarial_accuracy,
                            py::arg("success_rate") = ev.success_rate,
                            py::arg("gini") = ev.means.gini,
                            py::arg("hoyer") = ev.means.hoyer,
                            py::arg("l0_fraction") = ev.means.l0_fraction,
                            py::arg("t_gauss") = ev.means.t_gauss,
                            py::arg("t_lowpass") = ev.means.t_lowpass,
                            py::arg("t_taylor") = ev.means.t_taylor,
                            py::arg("undefined_sparsity") = ev.undefined_sparsity,
                            py::arg("max_lp_ratio") = ev.max_lp_ratio,
                            py::arg("success") = successes, py::arg("example_gini") = ginis);
        },
        py::arg("model"), py::arg("images"), py::arg("labels"), py::arg("p"),
        py::arg("epsilon"), py::arg("iterations") = 100, py::arg("restarts") = 1,
        py::arg("seed") = 0, py::arg("threads") = 1, py::arg("pixel_threshold") = 0.0,
        py::arg("taylor_neighborhood") = 4);

    m.def(
        "calibrate_epsilon",
        [](const PyModel& model, const DoubleArray& images, const LabelArray& labels, double p,
           int subset_size, int iterations, std::uint64_t seed, unsigned threads) {
            const Dataset data =
                as_dataset(images, labels, model.ref().num_classes(), "test");
            CalibrationConfig cfg;
            cfg.subset_size = subset_size;
            cfg.subset_seed = seed;
            AttackConfig tmpl;
            tmpl.iterations = iterations;
            tmpl.seed = seed;
            const CalibrationResult r =
                calibrate_epsilon(model.ref(), data, p, tmpl, cfg, threads);
            return py::dict(py::arg("p") = r.p, py::arg("epsilon") = r.epsilon,
                            py::arg("achieved_accuracy") = r.achieved_accuracy,
                            py::arg("target_accuracy") = r.target_accuracy,
                            py::arg("clean_accuracy") = r.clean_accuracy,
                            py::arg("bracket_failed") = r.bracket_failed);
        },
        py::arg("model"), py::arg("images"), py::arg("labels"), py::arg("p"),
        py::arg("subset_size") = 200, py::arg("iterations") = 100, py::arg("seed") = 0,
        py::arg("threads") = 1,
        "Smallest probed budget pushing adversarial accuracy to clean/3.");

    m.def("default_p_grid", &default_p_grid);
    m.def("normalize_curve", &normalize_curve, py::arg("raw"));
    m.def(
        "beta_opt",
        [](const std::vector<double>& grid, const std::vector<std::vector<double>>& raw_curves) {
            std::vector<MeasureCurve> curves;
            for (std::size_t i = 0; i < raw_curves.size(); ++i) {
                MeasureCurve c;
                c.name = "m" + std::to_string(i);
                c.grid = grid;
                c.raw = raw_curves[i];
                c.normalized = normalize_curve(c.raw);
                curves.push_back(std::move(c));
            }
            const auto [beta, set] = beta_opt_and_set(curves);
            return py::make_tuple(beta, set);
        },
        py::arg("grid"), py::arg("curves"),
        "Max-min threshold over min-max-normalized measure curves; returns "
        "(beta_opt, optimal_p_set).");
}
