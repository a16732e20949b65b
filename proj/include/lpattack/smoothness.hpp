#pragma once

#include <span>
#include <vector>

#include "lpattack/types.hpp"

namespace lpa {

enum class SmoothingOperator { gaussian, lowpass };

/// Operator strength ladder alpha_1 < ... < alpha_n with the per-step weight
/// exp(-alpha_i) and the operator parameter (sigma or frequency cutoff) each
/// step maps to.
struct AlphaSchedule {
    std::vector<double> alphas;
    std::vector<double> params;

    void validate() const;
    std::size_t size() const { return alphas.size(); }
};

/// alpha in {1..10}, sigma_i = alpha_i.
AlphaSchedule default_gaussian_schedule();

/// alpha in {1..10}; cutoff_i = (11 - alpha_i)^2 mapped linearly onto
/// [0, min(h,w)/2] (i.e. raw value 100 -> the half-size Nyquist radius), so
/// the strongest step keeps only the lowest spatial frequencies.
AlphaSchedule default_lowpass_schedule(int height, int width);

/// Gaussian blur of standard deviation sigma on the periodic (torus) domain,
/// applied per channel in the frequency domain with the heat-kernel transfer
/// exp(-2 pi^2 sigma^2 (fu^2/h^2 + fv^2/w^2)). Periodic + spectral makes the
/// deviation exactly non-decreasing in sigma and the large-sigma limit the
/// exact channel mean. Works on any flat HWC buffer (perturbations included);
/// the Image overload preserves the [0,1] range because the equivalent
/// spatial kernel is convex.
std::vector<double> gaussian_smooth(std::span<const double> data, int h, int w, int c,
                                    double sigma);
Image gaussian_smooth(const Image& image, double sigma);

/// Ideal low-pass filter: per-channel 2-d DFT, zeroing every bin whose
/// radial frequency index sqrt(fu^2 + fv^2) (signed frequencies) exceeds the
/// cutoff, then inverse transform. The mask is conjugate-symmetric so the
/// result is real up to roundoff; the imaginary residue is discarded.
std::vector<double> lowpass_smooth(std::span<const double> data, int h, int w, int c,
                                   double cutoff);
Image lowpass_smooth(const Image& image, double cutoff);

/// Root-mean-square elementwise deviation between the operator output and
/// the input for one step: sqrt(mean((smoothed - data)^2)). RMS rather than
/// mean-absolute because Parseval then turns the spectral structure of both
/// operators (nested masks, gains shrinking with sigma) into exact
/// monotonicity of d(alpha), which the measure's framework relies on.
double operator_deviation(std::span<const double> data, int h, int w, int c,
                          SmoothingOperator op, double param);

/// Smoothness under an operator family:
///   T = - sum_i exp(-alpha_i) * d(alpha_i),
/// where d is the mean absolute deviation of the alpha_i-strength operator
/// output from the input. Always <= 0; 0 exactly when every step leaves the
/// input unchanged. Discretizes with unit step weights along the schedule.
double smoothness_t_c(std::span<const double> data, int h, int w, int c, SmoothingOperator op,
                      const AlphaSchedule& schedule);
double smoothness_t_c(const Perturbation& perturbation, SmoothingOperator op,
                      const AlphaSchedule& schedule);

/// Gradient-based smoothness: reconstructs each interior value from the
/// first-order Taylor expansions of its neighbours (offsets at distance 1 for
/// neighborhood = 4, distances 1 and sqrt(2) for 8), with central-difference
/// gradients under replicate padding, and returns -||reconstruction - data||_2
/// over interior pixels (2-pixel margin) and all channels. Interior pixels of
/// a per-channel affine ramp reconstruct exactly, so the measure is 0 there.
double taylor_smoothness(std::span<const double> data, int h, int w, int c,
                         int neighborhood = 4);
double taylor_smoothness(const Perturbation& perturbation, int neighborhood = 4);

}  // namespace lpa
