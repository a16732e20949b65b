#pragma once

#include <filesystem>

#include "lpattack/types.hpp"

namespace lpa {

/// Binary dataset container:
///   bytes 0-3   magic "LPDS"
///   byte  4     format version (1)
///   byte  5     split tag (0 = train, 1 = test)
///   bytes 6-15  reserved (zero)
///   u32le       height, width, channels, num_classes, num_examples
///   per example u32le label followed by h*w*c float32le intensities
/// Intensities must be finite and in [0,1]; labels must be < num_classes.
void save_dataset(const Dataset& data, const std::filesystem::path& path);

Dataset load_dataset(const std::filesystem::path& path);

}  // namespace lpa
