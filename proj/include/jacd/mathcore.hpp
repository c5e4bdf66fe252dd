#pragma once

// Proximal operators, shrinkage/clamp primitives and posterior mean
// estimators shared by all solver variants.

#include <vector>

#include "jacd/types.hpp"

namespace jacd {

// Smoothing constant for norms in training mode (gradients stay finite at 0).
inline constexpr double kNormEps = 1e-40;

// Coefficients of the quartic 2*C1 b^4 - 4*C1 b^3 + (2*C1+C2+C3) b^2
// - 2*C2 b + C2 = 0 arising in the box-constrained group prox.
struct QuarticCoeffs {
  double c1 = 0.0;  // sum of squared free entries, >= 0
  double c2 = 0.0;  // 2 * B^2 * number of clipped entries, >= 0
  double c3 = 0.0;  // -2*(kappa)^2, <= 0
};

// x * max(||x|| - mu, 0) / ||x||; zero maps to zero.
// When smoothed, the denominator is sqrt(||x||^2 + kNormEps).
CVec group_shrinkage(const CVec& x, double mu, bool smoothed = false);
RVec group_shrinkage(const RVec& x, double mu, bool smoothed = false);

// Per-part clamp of real and imaginary components to [lo, hi].
CVec clamp_box(const CVec& x, double lo, double hi);
cplx clamp_box(cplx x, double lo, double hi);

// Real root of the prox quartic inside (0, 1]. Candidate roots are taken
// from the companion matrix of the (possibly degenerate) polynomial and
// polished with Newton steps; 0 signals "no root" per Proposition 1.
// When several roots qualify the caller disambiguates by objective value,
// so all in-range roots are returned.
std::vector<double> solve_prox_quartic(const QuarticCoeffs& c);

// Exact minimizer of 0.5*||x - xhat||^2 + kappa*||x|| over the box
// |Re|,|Im| <= B (per entry).
CVec prox_box_group(const CVec& xhat, double kappa, double B);

// Value of 0.5*||x - xhat||^2 + kappa*||x|| (no box term; callers check
// feasibility separately).
double prox_objective(const CVec& x, const CVec& xhat, double kappa);

// Exact posterior mean of x under the alpha-mixed discrete uniform prior
// on {Q^{R_D}, 0}, observed through CN(0, Ne I) noise. Enumerates Q^{R_D};
// throws when the enumeration exceeds test scale.
CVec pme_exact(const CVec& xhat, const std::vector<cplx>& constellation,
               double alpha, double ne);

// Per-symbol posterior mean under the uniform prior on Q.
cplx pme_uniform_scalar(cplx xhat, const std::vector<cplx>& constellation,
                        double ne);

// Mixing coefficient C_PME of Proposition 2, computed in log domain with
// the per-entry product factorization of the uniform prior on Q^{R_D}.
double c_pme(const CVec& xhat, const std::vector<cplx>& constellation,
             double alpha, double ne);

// Approximate mixing coefficient: Clamp(rho - nu/||xhat||, 0, 1).
double c_apme(const CVec& xhat, double rho, double nu, bool smoothed = false);

}  // namespace jacd
