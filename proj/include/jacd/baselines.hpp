#pragma once

// Reference receivers: pilot-only FBS channel estimation (Baseline 1),
// linear MMSE data detection (Baseline 3) and unboxed joint FBS (Baseline 5).

#include <vector>

#include "jacd/solvers.hpp"
#include "jacd/types.hpp"

namespace jacd {

struct BaselineConfig {
  int K_iter = 200;
  double tol = 1e-3;
  double mu_h = 0.0;
  double prior_var = 1.0;  // MMSE symbol prior variance
};

// FBS on 0.5*||Y_P - H X_P||^2 + mu_h * sum ||h_{n,p}||.
CMat fbs_channel_estimate(const CMat& Y_P, const CMat& X_P, double mu_h,
                          int K_iter, double tol, int M);

// Least-squares detection on the detected-active columns; inactive rows stay
// zero. Rank-deficient active submatrices fall back to the pseudo-inverse.
CMat ls_detect(const CMat& Y_D, const CMat& h_masked, const std::vector<int>& xi_hat,
               bool* rank_deficient = nullptr);

// Linear MMSE with a Gaussian symbol prior on the active columns.
CMat mmse_detect(const CMat& Y_D, const CMat& h_masked, const std::vector<int>& xi_hat,
                 double noise_var, double prior_var);

FbsState baseline5_jacd(const CMat& Y, const CMat& X_P, const SolverParams& params,
                        FbsState init);

}  // namespace jacd
