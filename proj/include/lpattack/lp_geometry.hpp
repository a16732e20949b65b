#pragma once

#include <span>
#include <vector>

namespace lpa {

/// ||v||_p for p >= 1. Scaled by max|v_i| internally so extreme magnitudes
/// neither overflow nor underflow for p close to 1.
double lp_norm(std::span<const double> v, double p);

/// Per-coordinate free capacity of the image box in the direction of w:
/// gamma_i = (1 - x_i) when w_i > 0, x_i when w_i < 0, and 0 when w_i = 0.
/// This is how far delta_i can move in the sign of w_i without leaving
/// [-x_i, 1 - x_i].
std::vector<double> box_gamma(std::span<const double> x, std::span<const double> w);

struct LmoSolution {
    std::vector<double> delta;
    double mu_star = 0.0;    ///< lp multiplier; 0 iff the box alone binds (eps > 0)
    double objective = 0.0;  ///< <w, delta>
};

/// Maximizes <w, delta> over { ||delta||_p <= eps } intersected with the
/// image box [-x, 1-x], for p in (1, 2].
///
/// Stationarity of the partial Lagrangian gives, per coordinate,
///   delta_i = sign(w_i) * min{ gamma_i, (|w_i| / (p mu))^(1/(p-1)) },
/// and the multiplier mu >= 0 is chosen so the lp constraint is tight
/// whenever the box alone does not already enforce it. The tight mu is found
/// by sorting the per-coordinate clipping thresholds and solving the active
/// segment in closed form; a safeguarded bisection on the monotone map
/// mu -> ||delta(mu)||_p backs the closed form up when cancellation bites
/// (p near 1 raises exponents like 1/(p-1) ~ 100). Gradients are rescaled by
/// max|w_i| first so those powers stay in range.
///
/// Post: delta is inside the box exactly and ||delta||_p <= eps * (1 + 1e-9).
LmoSolution lmo_lp_box(std::span<const double> w, std::span<const double> x, double eps,
                       double p);

/// The KKT map mu -> delta(mu) used by lmo_lp_box, exposed on its own: each
/// coordinate is sign(w_i) * min{gamma_i, (|w_i|/(p mu))^(1/(p-1))}. Requires
/// mu > 0. ||delta(mu)||_p is non-increasing in mu, which the solver's
/// bisection fallback and the property tests both rely on.
std::vector<double> lmo_delta_at_mu(std::span<const double> w, std::span<const double> x,
                                    double p, double mu);

/// Euclidean projection of v onto { ||delta||_1 <= eps } intersected with the
/// image box [-x, 1-x]. Because the box contains 0, the projection is
/// clip(soft_threshold(v, lambda)) with lambda >= 0 driven by bisection until
/// the l1 budget holds with equality (or lambda = 0 if v clipped to the box
/// is already inside the ball). Requires eps > 0.
std::vector<double> project_l1_box(std::span<const double> v, std::span<const double> x,
                                   double eps);

}  // namespace lpa
