#pragma once

// Classical JACD solvers: box-constrained FBS and PME-based JACD on the
// shared forward-backward splitting skeleton.

#include <vector>

#include "jacd/types.hpp"

namespace jacd {

struct FbsState {
  CMat H;    // MP x N
  CMat Xd;   // N x R_D
  int iterations = 0;
  std::vector<double> objective_trace;
};

struct SolverParams {
  double mu_h = 0.0;
  double mu_x = 0.0;
  double lambda = 0.0;
  double tau = 0.0;    // step size; 0 selects the Lipschitz rule
  int K = 200;
  double tol = 1e-3;   // relative change of S
  int M = 1;           // antennas per AP (shrinkage block length)
  double B = 0.7071067811865476;
  // Weight on the PME output in the backward step; values < 1 under-relax
  // the denoiser, which keeps it from hard-locking under strong near-far
  // power imbalance. Only the PME variant reads this.
  double pme_damping = 1.0;
};

// Gradient of f(S) = 0.5*||Y - H[X_P, X_D]||^2 + lambda*C(X_D) in the
// (d/dRe + i d/dIm) convention, so it matches finite differences of f.
void gradient_f(const CMat& H, const CMat& Xd, const CMat& Y, const CMat& X_P,
                double lambda, double B, CMat& grad_H, CMat& grad_Xd);

double objective_f(const CMat& H, const CMat& Xd, const CMat& Y, const CMat& X_P,
                   double lambda, double B);

// Full P2 objective: f plus the group-sparsity terms.
double objective_p2(const FbsState& state, const CMat& Y, const CMat& X_P,
                    const SolverParams& params);

// Conservative step bound: spectral norms of X X^H and H^H H (50 power
// iterations each) plus a residual cross term.
double lipschitz_estimate(const CMat& H, const CMat& Xd, const CMat& Y,
                          const CMat& X_P);

// One gradient step S - tau * grad f(S).
void fbs_forward(CMat& H, CMat& Xd, const CMat& Y, const CMat& X_P, double tau,
                 double lambda, double B);

// Per-(n,p) block group shrinkage on the M-length sub-vectors of each column.
CMat backward_H(const CMat& h_hat, double kappa, int M);

// Row-wise box-constrained group prox.
CMat backward_Xd_box(const CMat& xd_hat, double kappa, double B);

// Row-wise exact PME (enumeration; test scale only).
CMat backward_Xd_pme(const CMat& xd_hat, const std::vector<cplx>& constellation,
                     double alpha, double ne);

// Row-wise factorized PME, c_pme * per-symbol uniform PME (exact by the
// product factorization; any scale).
CMat backward_Xd_pme_factorized(const CMat& xd_hat,
                                const std::vector<cplx>& constellation,
                                double alpha, double ne);

FbsState run_box_fbs(const CMat& Y, const CMat& X_P, const SolverParams& params,
                     FbsState init);

// ne_schedule may be empty: the residual estimate ||Y - H X||^2 / (MP*R) is
// recomputed each iteration so the denoiser sharpens as the fit improves.
FbsState run_pme_jacd(const CMat& Y, const CMat& X_P, const SolverParams& params,
                      const std::vector<cplx>& constellation, double alpha,
                      std::vector<double> ne_schedule, FbsState init);

// Baseline-5 style variant: identical to run_box_fbs with lambda = 0 and the
// box removed (plain row-group shrinkage on X_D).
FbsState run_unboxed_fbs(const CMat& Y, const CMat& X_P, const SolverParams& params,
                         FbsState init);

}  // namespace jacd
