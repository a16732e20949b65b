#pragma once

#include <span>
#include <stdexcept>

#include "lpattack/types.hpp"

namespace lpa {

/// Sparsity is undefined for an all-zero vector (nothing to distribute).
struct UndefinedSparsity : std::domain_error {
    using std::domain_error::domain_error;
};

/// Gini index of a non-negative vector: sorts ascending and evaluates
///   1 - 2 * sum_k (c_k / ||c||_1) * ((N - k + 1/2) / N).
/// 0 for a uniform vector, 1 - 1/N for a one-hot vector, scale invariant.
double gini(std::span<const double> c);

/// Hoyer measure (sqrt(N) - ||c||_1 / ||c||_2) / (sqrt(N) - 1). Needs N >= 2;
/// 0 for uniform, exactly 1 for one-hot, scale invariant.
double hoyer(std::span<const double> c);

/// Fraction of pixels whose perturbation magnitude exceeds the threshold in
/// at least one channel; denominator is height * width. threshold = 0 counts
/// exact non-zeros.
double l0_fraction(const Perturbation& perturbation, double pixel_threshold = 0.0);

}  // namespace lpa
