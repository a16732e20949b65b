#include "lpattack/sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace lpa {

namespace {

double l1_of(std::span<const double> c, const char* who) {
    double s = 0.0;
    for (double v : c) {
        if (!(v >= 0.0))
            throw std::invalid_argument(std::string(who) + " requires non-negative entries");
        s += v;
    }
    return s;
}

}  // namespace

double gini(std::span<const double> c) {
    if (c.empty()) throw std::invalid_argument("gini of an empty vector");
    const double total = l1_of(c, "gini");
    if (total == 0.0) throw UndefinedSparsity("gini undefined for the all-zero vector");
    std::vector<double> sorted(c.begin(), c.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        const double rank = static_cast<double>(k + 1);  // 1-based, ascending
        acc += (sorted[k] / total) * ((n - rank + 0.5) / n);
    }
    return 1.0 - 2.0 * acc;
}

double hoyer(std::span<const double> c) {
    if (c.size() < 2) throw std::invalid_argument("hoyer needs at least two entries");
    double l1 = 0.0, sq = 0.0;
    for (double v : c) {
        if (!(v >= 0.0)) throw std::invalid_argument("hoyer requires non-negative entries");
        l1 += v;
        sq += v * v;
    }
    if (l1 == 0.0) throw UndefinedSparsity("hoyer undefined for the all-zero vector");
    const double root_n = std::sqrt(static_cast<double>(c.size()));
    return (root_n - l1 / std::sqrt(sq)) / (root_n - 1.0);
}

double l0_fraction(const Perturbation& perturbation, double pixel_threshold) {
    if (!(pixel_threshold >= 0.0))
        throw std::invalid_argument("pixel threshold must be >= 0");
    const int h = perturbation.height, w = perturbation.width, c = perturbation.channels;
    std::size_t touched = 0;
    for (int r = 0; r < h; ++r)
        for (int col = 0; col < w; ++col) {
            const std::size_t base = (static_cast<std::size_t>(r) * w + col) * c;
            for (int ch = 0; ch < c; ++ch)
                if (std::abs(perturbation.delta[base + ch]) > pixel_threshold) {
                    ++touched;
                    break;
                }
        }
    return static_cast<double>(touched) / (static_cast<double>(h) * w);
}

}  // namespace lpa
