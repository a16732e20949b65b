#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lpa {

/// Raised when an intensity, label or stored value leaves its legal range.
struct ValueOutOfRange : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised by the binary readers (datasets, model checkpoints) when the file
/// doesn't start with the expected magic/version/field layout.
struct MalformedHeader : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when a binary file ends before the promised payload does.
struct TruncatedFile : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// H x W x C image, row-major (row, column, channel), intensities in [0,1].
/// Values within 1e-12 of the box are snapped onto it; anything further out
/// is rejected, so downstream code can rely on the bounds exactly.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, int c, std::vector<double> values);

    static Image constant(int h, int w, int c, double value);

    std::size_t size() const { return data.size(); }

    std::size_t index(int r, int c, int ch) const {
        return (static_cast<std::size_t>(r) * width + c) * channels + ch;
    }
    double at(int r, int c, int ch) const { return data[index(r, c, ch)]; }
    double& at(int r, int c, int ch) { return data[index(r, c, ch)]; }
};

struct LabeledExample {
    Image image;
    int label = 0;
};

enum class Split : std::uint8_t { train = 0, test = 1 };

const char* to_string(Split split);
Split split_from_string(const std::string& name);

struct Dataset {
    std::vector<LabeledExample> examples;
    int num_classes = 0;
    Split split = Split::train;

    int height() const { return examples.empty() ? 0 : examples.front().image.height; }
    int width() const { return examples.empty() ? 0 : examples.front().image.width; }
    int channels() const { return examples.empty() ? 0 : examples.front().image.channels; }
    std::size_t size() const { return examples.size(); }

    /// Checks shape agreement across examples and label range. Throws on violation.
    void validate() const;
};

/// Additive perturbation of a source image together with the constraint it
/// was produced under. Construction clamps delta onto the image box
/// [-x, 1-x] exactly and verifies the lp budget (small numerical slack).
struct Perturbation {
    std::vector<double> delta;
    int height = 0;
    int width = 0;
    int channels = 0;
    double p = 2.0;
    double epsilon = 0.0;

    Perturbation() = default;
    Perturbation(std::vector<double> values, double p, double epsilon, const Image& source);

    std::size_t size() const { return delta.size(); }
};

/// source + delta as a valid Image (constructor re-checks the [0,1] box).
Image perturbed_image(const Image& source, const Perturbation& perturbation);

}  // namespace lpa
