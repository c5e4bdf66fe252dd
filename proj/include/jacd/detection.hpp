#pragma once

// Activity detection, hard symbol decisions, masking and the evaluation
// metrics.

#include <vector>

#include "jacd/types.hpp"

namespace jacd {

struct AudParams {
  double omega_h = 1.0;
  double omega_x = 1.0;
  double T_th = 0.0;    // sigmoid offset
  double L_bar = 0.5;   // soft-score decision threshold
  double T_aud = 0.0;   // channel-energy decision threshold
};

struct DetectionResult {
  std::vector<int> xi_hat;
  RVec scores;     // soft scores or raw energies, used for ROC sweeps
  CMat Xd_hard;    // nearest-symbol matrix
  CMat Xd_masked;  // activity-masked matrix
};

struct TrialMetrics {
  double uder = 0.0;
  double nmse = 0.0;
  double aser = 0.0;
  double tpr = 0.0;  // detections among truly active UEs
  double fpr = 0.0;  // false actives among truly inactive UEs
  bool aser_undefined = false;  // no active UE in the trial
  bool fpr_undefined = false;   // no inactive UE in the trial
};

RVec column_energies(const CMat& h_est);

std::vector<int> aud_energy(const CMat& h_est, double t_aud);

// L_n = sigmoid(omega_h*||h_n||^2 + omega_x*||x_n||^2 - T_th).
RVec aud_soft(const CMat& h_est, const CMat& xd_est, const AudParams& ap);

// Entry-wise nearest symbol; ties resolved by lowest constellation index.
CMat hard_decide(const CMat& xd_est, const std::vector<cplx>& constellation);

CMat mask_activity(const CMat& xd_hard, const std::vector<int>& xi_hat);

TrialMetrics compute_metrics(const std::vector<int>& xi_true, const CMat& xd_true,
                             const CMat& h_true, const std::vector<int>& xi_hat,
                             const CMat& xd_hard, const CMat& h_est);

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

// One (FPR, TPR) point per threshold from thresholding the given scores.
std::vector<RocPoint> roc_sweep(const RVec& scores, const std::vector<int>& xi_true,
                                const std::vector<double>& thresholds);

}  // namespace jacd
