#include "lpattack/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "lpattack/util.hpp"

namespace lpa {

void SyntheticConfig::validate() const {
    if (height < 8 || width < 8)
        throw std::invalid_argument("synthetic images must be at least 8x8");
    if (channels < 1) throw std::invalid_argument("channels must be >= 1");
    if (num_classes < 2 || num_classes > kMaxSyntheticClasses)
        throw std::invalid_argument("num_classes must lie in [2," +
                                    std::to_string(kMaxSyntheticClasses) + "]");
    if (samples_per_class < 1) throw std::invalid_argument("samples_per_class must be >= 1");
    if (!(noise_amplitude >= 0.0 && noise_amplitude <= 0.5))
        throw std::invalid_argument("noise amplitude must lie in [0, 0.5]");
}

namespace {

double grating_value(const SyntheticConfig& cfg, int klass, int r, int c, int ch) {
    // 8 orientations x 4 frequencies; class k picks orientation k % 8 and
    // frequency band k / 8. Coordinates are normalized so the frequency is
    // in cycles per image regardless of resolution.
    const int orientation = klass % 8;
    const int band = klass / 8;
    const double theta = std::numbers::pi * orientation / 8.0;
    const double cycles = 2.0 + band;
    const double u = std::cos(theta) * (c + 0.5) / cfg.width +
                     std::sin(theta) * (r + 0.5) / cfg.height;
    const double phase = 0.7 * ch;  // channels are phase-shifted copies
    return 0.5 + 0.35 * std::sin(2.0 * std::numbers::pi * cycles * u + phase);
}

}  // namespace

Dataset generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
    config.validate();
    Dataset data;
    data.num_classes = config.num_classes;
    data.split = config.split;
    data.examples.reserve(static_cast<std::size_t>(config.num_classes) *
                          config.samples_per_class);

    const std::uint64_t split_stream =
        mix_seed(seed, 0x73706c30ULL + static_cast<std::uint64_t>(config.split));
    for (int klass = 0; klass < config.num_classes; ++klass) {
        for (int sample = 0; sample < config.samples_per_class; ++sample) {
            std::mt19937_64 rng(
                mix_seed(split_stream, static_cast<std::uint64_t>(klass) * 100000ULL + sample));
            std::vector<double> values(static_cast<std::size_t>(config.height) *
                                       config.width * config.channels);
            std::size_t i = 0;
            for (int r = 0; r < config.height; ++r)
                for (int c = 0; c < config.width; ++c)
                    for (int ch = 0; ch < config.channels; ++ch) {
                        double v = grating_value(config, klass, r, c, ch);
                        if (config.noise_amplitude > 0.0)
                            v += rng_uniform(rng, -config.noise_amplitude,
                                             config.noise_amplitude);
                        v = std::clamp(v, 0.0, 1.0);
                        // Quantize through float32 now so the on-disk format
                        // (float32) round-trips to the exact same dataset.
                        values[i++] = static_cast<double>(static_cast<float>(v));
                    }
            data.examples.push_back(
                {Image(config.height, config.width, config.channels, std::move(values)), klass});
        }
    }
    data.validate();
    return data;
}

}  // namespace lpa
