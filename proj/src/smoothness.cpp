#include "lpattack/smoothness.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace lpa {

namespace {

void check_buffer(std::span<const double> data, int h, int w, int c, const char* who) {
    if (h <= 0 || w <= 0 || c <= 0)
        throw std::invalid_argument(std::string(who) + ": shape must be positive");
    if (data.size() != static_cast<std::size_t>(h) * w * c)
        throw std::invalid_argument(std::string(who) + ": buffer size does not match shape");
    for (double v : data)
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string(who) + ": non-finite input value");
}

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

}  // namespace

void AlphaSchedule::validate() const {
    if (alphas.empty()) throw std::invalid_argument("empty smoothing schedule");
    if (params.size() != alphas.size())
        throw std::invalid_argument("schedule has " + std::to_string(params.size()) +
                                    " parameters for " + std::to_string(alphas.size()) +
                                    " strengths");
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] > 0.0)) throw std::invalid_argument("strengths must be positive");
        if (i > 0 && !(alphas[i] > alphas[i - 1]))
            throw std::invalid_argument("strengths must be strictly increasing");
    }
}

AlphaSchedule default_gaussian_schedule() {
    AlphaSchedule s;
    for (int a = 1; a <= 10; ++a) {
        s.alphas.push_back(static_cast<double>(a));
        s.params.push_back(static_cast<double>(a));  // sigma = alpha
    }
    return s;
}

AlphaSchedule default_lowpass_schedule(int height, int width) {
    if (height <= 0 || width <= 0) throw std::invalid_argument("shape must be positive");
    const double nyquist = 0.5 * std::min(height, width);
    AlphaSchedule s;
    for (int a = 1; a <= 10; ++a) {
        s.alphas.push_back(static_cast<double>(a));
        const double raw = static_cast<double>((11 - a) * (11 - a));  // 100 down to 1
        s.params.push_back(raw / 100.0 * nyquist);
    }
    return s;
}

namespace {

using cd = std::complex<double>;

/// Dense DFT twiddle table e^(-2 pi i j k / n) (sign flips for the inverse).
std::vector<cd> dft_table(int n, bool inverse) {
    std::vector<cd> t(static_cast<std::size_t>(n) * n);
    const double sign = inverse ? 2.0 : -2.0;
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            const double ang = sign * std::numbers::pi * static_cast<double>(j) * k / n;
            t[static_cast<std::size_t>(j) * n + k] = cd(std::cos(ang), std::sin(ang));
        }
    return t;
}

int signed_freq(int i, int n) { return i <= n / 2 ? i : i - n; }

/// Per-channel 2-d DFT, multiply each bin by gain(fu, fv) (signed frequency
/// indices), inverse transform. Real symmetric gains keep the output real up
/// to roundoff; the imaginary residue is discarded. Shared by both smoothing
/// operators, so their deviations are exactly comparable in the spectrum.
template <typename Gain>
std::vector<double> spectral_filter(std::span<const double> data, int h, int w, int c,
                                    Gain&& gain) {
    const auto fw_h = dft_table(h, false), fw_w = dft_table(w, false);
    const auto bw_h = dft_table(h, true), bw_w = dft_table(w, true);

    std::vector<double> out(data.size());
    std::vector<cd> chan(static_cast<std::size_t>(h) * w), tmp(chan.size());
    for (int ch = 0; ch < c; ++ch) {
        for (int r = 0; r < h; ++r)
            for (int col = 0; col < w; ++col)
                chan[static_cast<std::size_t>(r) * w + col] =
                    cd(data[(static_cast<std::size_t>(r) * w + col) * c + ch], 0.0);
        // rows then columns, forward
        for (int r = 0; r < h; ++r)
            for (int v = 0; v < w; ++v) {
                cd s = 0.0;
                for (int col = 0; col < w; ++col)
                    s += chan[static_cast<std::size_t>(r) * w + col] *
                         fw_w[static_cast<std::size_t>(v) * w + col];
                tmp[static_cast<std::size_t>(r) * w + v] = s;
            }
        for (int v = 0; v < w; ++v)
            for (int u = 0; u < h; ++u) {
                cd s = 0.0;
                for (int r = 0; r < h; ++r)
                    s += tmp[static_cast<std::size_t>(r) * w + v] *
                         fw_h[static_cast<std::size_t>(u) * h + r];
                chan[static_cast<std::size_t>(u) * w + v] = s;
            }
        for (int u = 0; u < h; ++u)
            for (int v = 0; v < w; ++v)
                chan[static_cast<std::size_t>(u) * w + v] *=
                    gain(signed_freq(u, h), signed_freq(v, w));
        // inverse
        for (int u = 0; u < h; ++u)
            for (int col = 0; col < w; ++col) {
                cd s = 0.0;
                for (int v = 0; v < w; ++v)
                    s += chan[static_cast<std::size_t>(u) * w + v] *
                         bw_w[static_cast<std::size_t>(col) * w + v];
                tmp[static_cast<std::size_t>(u) * w + col] = s;
            }
        const double scale = 1.0 / (static_cast<double>(h) * w);
        for (int col = 0; col < w; ++col)
            for (int r = 0; r < h; ++r) {
                cd s = 0.0;
                for (int u = 0; u < h; ++u)
                    s += tmp[static_cast<std::size_t>(u) * w + col] *
                         bw_h[static_cast<std::size_t>(r) * h + u];
                out[(static_cast<std::size_t>(r) * w + col) * c + ch] = s.real() * scale;
            }
    }
    return out;
}

}  // namespace

std::vector<double> gaussian_smooth(std::span<const double> data, int h, int w, int c,
                                    double sigma) {
    check_buffer(data, h, w, c, "gaussian_smooth");
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    // Heat-kernel transfer function on the torus. Every non-DC gain falls
    // strictly as sigma grows and DC stays at 1, which is what makes the
    // deviation exactly non-decreasing in sigma and the limit exactly the
    // channel mean. The matching spatial kernel (wrapped Gaussian of standard
    // deviation sigma) is positive with unit sum, so values never leave
    // [min, max].
    const double k = -2.0 * std::numbers::pi * std::numbers::pi * sigma * sigma;
    return spectral_filter(data, h, w, c, [&](int fu, int fv) {
        return std::exp(k * (static_cast<double>(fu) * fu / (static_cast<double>(h) * h) +
                             static_cast<double>(fv) * fv / (static_cast<double>(w) * w)));
    });
}

Image gaussian_smooth(const Image& image, double sigma) {
    auto out = gaussian_smooth(image.data, image.height, image.width, image.channels, sigma);
    // convex weights keep intensities in range; clamp only mops up roundoff
    for (double& v : out) v = std::clamp(v, 0.0, 1.0);
    return Image(image.height, image.width, image.channels, std::move(out));
}

std::vector<double> lowpass_smooth(std::span<const double> data, int h, int w, int c,
                                   double cutoff) {
    check_buffer(data, h, w, c, "lowpass_smooth");
    if (!(cutoff >= 0.0)) throw std::invalid_argument("cutoff must be >= 0");
    const double cutoff_sq = cutoff * cutoff;
    return spectral_filter(data, h, w, c, [&](int fu, int fv) {
        return static_cast<double>(fu) * fu + static_cast<double>(fv) * fv <= cutoff_sq ? 1.0
                                                                                        : 0.0;
    });
}

Image lowpass_smooth(const Image& image, double cutoff) {
    auto out = lowpass_smooth(image.data, image.height, image.width, image.channels, cutoff);
    // Ideal low-pass ringing can overshoot [0,1]; clamp so the result is a
    // valid image. Measures use the raw buffer variant and never clamp.
    for (double& v : out) v = std::clamp(v, 0.0, 1.0);
    return Image(image.height, image.width, image.channels, std::move(out));
}

double operator_deviation(std::span<const double> data, int h, int w, int c,
                          SmoothingOperator op, double param) {
    const auto smoothed = op == SmoothingOperator::gaussian
                              ? gaussian_smooth(data, h, w, c, param)
                              : lowpass_smooth(data, h, w, c, param);
    // root-mean-square per element: by Parseval this is a norm on the removed
    // spectrum, so nested masks / shrinking gains give exact monotonicity
    double acc = 0.0;
    for (std::size_t i = 0; i < smoothed.size(); ++i) {
        const double d = smoothed[i] - data[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(data.size()));
}

double smoothness_t_c(std::span<const double> data, int h, int w, int c, SmoothingOperator op,
                      const AlphaSchedule& schedule) {
    check_buffer(data, h, w, c, "smoothness_t_c");
    schedule.validate();
    double t = 0.0;
    for (std::size_t i = 0; i < schedule.size(); ++i)
        t -= std::exp(-schedule.alphas[i]) *
             operator_deviation(data, h, w, c, op, schedule.params[i]);
    return t;
}

double smoothness_t_c(const Perturbation& perturbation, SmoothingOperator op,
                      const AlphaSchedule& schedule) {
    return smoothness_t_c(perturbation.delta, perturbation.height, perturbation.width,
                          perturbation.channels, op, schedule);
}

double taylor_smoothness(std::span<const double> data, int h, int w, int c, int neighborhood) {
    check_buffer(data, h, w, c, "taylor_smoothness");
    if (neighborhood != 4 && neighborhood != 8)
        throw std::invalid_argument("neighborhood must be 4 or 8");
    if (h < 5 || w < 5)
        throw std::invalid_argument("taylor smoothness needs at least a 5x5 image");

    static constexpr int off4[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    static constexpr int off8[8][2] = {{-1, 0},  {1, 0},  {0, -1}, {0, 1},
                                       {-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
    const auto* offsets = neighborhood == 4 ? off4 : off8;

    const auto value = [&](int r, int col, int ch) {
        return data[(static_cast<std::size_t>(r) * w + col) * c + ch];
    };
    // central differences with replicate padding
    const auto grad_r = [&](int r, int col, int ch) {
        return 0.5 * (value(clamp_index(r + 1, h), col, ch) -
                      value(clamp_index(r - 1, h), col, ch));
    };
    const auto grad_c = [&](int r, int col, int ch) {
        return 0.5 * (value(r, clamp_index(col + 1, w), ch) -
                      value(r, clamp_index(col - 1, w), ch));
    };

    // Interior keeps a 2-pixel margin: every neighbour's central difference
    // then sees un-clamped samples, so affine images reconstruct exactly.
    double sq = 0.0;
    for (int r = 2; r < h - 2; ++r)
        for (int col = 2; col < w - 2; ++col)
            for (int ch = 0; ch < c; ++ch) {
                double recon = 0.0;
                for (int k = 0; k < neighborhood; ++k) {
                    const int ar = r + offsets[k][0], ac = col + offsets[k][1];
                    recon += value(ar, ac, ch) + grad_r(ar, ac, ch) * (r - ar) +
                             grad_c(ar, ac, ch) * (col - ac);
                }
                const double err = recon / neighborhood - value(r, col, ch);
                sq += err * err;
            }
    return -std::sqrt(sq);
}

double taylor_smoothness(const Perturbation& perturbation, int neighborhood) {
    return taylor_smoothness(perturbation.delta, perturbation.height, perturbation.width,
                             perturbation.channels, neighborhood);
}

}  // namespace lpa
