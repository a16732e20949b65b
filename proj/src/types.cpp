#include "lpattack/types.hpp"

#include <algorithm>
#include <cmath>

#include "lpattack/lp_geometry.hpp"

namespace lpa {

namespace {

constexpr double kBoxSlack = 1e-12;     // tolerated numeric overshoot of [0,1]
constexpr double kBudgetSlack = 1e-6;   // relative slack on ||delta||_p <= eps

void check_shape(int h, int w, int c) {
    if (h <= 0 || w <= 0 || c <= 0)
        throw std::invalid_argument("image shape must be positive, got " + std::to_string(h) +
                                    "x" + std::to_string(w) + "x" + std::to_string(c));
}

}  // namespace

Image::Image(int h, int w, int c, std::vector<double> values)
    : height(h), width(w), channels(c), data(std::move(values)) {
    check_shape(h, w, c);
    const std::size_t expected =
        static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c);
    if (data.size() != expected)
        throw std::invalid_argument("image data has " + std::to_string(data.size()) +
                                    " values, expected " + std::to_string(expected));
    for (double& v : data) {
        if (!std::isfinite(v) || v < -kBoxSlack || v > 1.0 + kBoxSlack)
            throw ValueOutOfRange("intensity " + std::to_string(v) + " outside [0,1]");
        v = std::clamp(v, 0.0, 1.0);
    }
}

Image Image::constant(int h, int w, int c, double value) {
    check_shape(h, w, c);
    return Image(h, w, c,
                 std::vector<double>(static_cast<std::size_t>(h) * w * c, value));
}

const char* to_string(Split split) {
    return split == Split::train ? "train" : "test";
}

Split split_from_string(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "test") return Split::test;
    throw std::invalid_argument("unknown split '" + name + "' (expected train or test)");
}

void Dataset::validate() const {
    if (num_classes < 1)
        throw std::invalid_argument("dataset needs at least one class");
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        if (ex.image.height != height() || ex.image.width != width() ||
            ex.image.channels != channels())
            throw std::invalid_argument("example " + std::to_string(i) +
                                        " has a mismatched shape");
        if (ex.label < 0 || ex.label >= num_classes)
            throw ValueOutOfRange("label " + std::to_string(ex.label) + " outside [0," +
                                  std::to_string(num_classes) + ")");
    }
}

Perturbation::Perturbation(std::vector<double> values, double p_, double epsilon_,
                           const Image& source)
    : delta(std::move(values)),
      height(source.height),
      width(source.width),
      channels(source.channels),
      p(p_),
      epsilon(epsilon_) {
    if (delta.size() != source.size())
        throw std::invalid_argument("perturbation size does not match the source image");
    if (!(p >= 1.0 && p <= 2.0))
        throw std::invalid_argument("perturbation p must lie in [1,2], got " + std::to_string(p));
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw std::invalid_argument("perturbation budget must be finite and >= 0");
    for (std::size_t i = 0; i < delta.size(); ++i) {
        if (!std::isfinite(delta[i])) throw ValueOutOfRange("non-finite perturbation entry");
        // Exactly inside the image box so source + delta stays in [0,1].
        delta[i] = std::clamp(delta[i], -source.data[i], 1.0 - source.data[i]);
    }
    const double norm = lp_norm(delta, p);
    if (norm > epsilon * (1.0 + kBudgetSlack) + 1e-15)
        throw ValueOutOfRange("perturbation lp norm " + std::to_string(norm) +
                              " exceeds budget " + std::to_string(epsilon));
}

Image perturbed_image(const Image& source, const Perturbation& perturbation) {
    if (perturbation.size() != source.size())
        throw std::invalid_argument("perturbation does not match the image shape");
    std::vector<double> out(source.data);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += perturbation.delta[i];
    return Image(source.height, source.width, source.channels, std::move(out));
}

}  // namespace lpa
