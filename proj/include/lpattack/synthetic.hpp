#pragma once

#include <cstdint>

#include "lpattack/types.hpp"

namespace lpa {

/// Class patterns are oriented sinusoidal gratings: 8 orientations x 4
/// spatial frequencies, hence at most 32 distinct classes.
inline constexpr int kMaxSyntheticClasses = 32;

struct SyntheticConfig {
    int height = 16;
    int width = 16;
    int channels = 3;
    int num_classes = 4;
    int samples_per_class = 50;
    double noise_amplitude = 0.1;  ///< uniform +/- noise added per value
    Split split = Split::train;

    void validate() const;
};

/// Deterministic labeled grating images: class pattern + seeded uniform
/// noise, clipped to [0,1] and quantized through float32 so that saving and
/// reloading reproduces the dataset bit for bit. The split tag feeds the seed
/// stream, so train and test draws are disjoint for the same seed.
Dataset generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

}  // namespace lpa
