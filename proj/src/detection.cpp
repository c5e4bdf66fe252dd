#include "jacd/detection.hpp"

#include <cmath>
#include <stdexcept>

namespace jacd {

RVec column_energies(const CMat& h_est) {
  return h_est.colwise().squaredNorm().real().transpose();
}

std::vector<int> aud_energy(const CMat& h_est, double t_aud) {
  if (t_aud < 0.0) throw std::invalid_argument("aud_energy: threshold < 0");
  RVec e = column_energies(h_est);
  std::vector<int> xi(e.size());
  for (Eigen::Index n = 0; n < e.size(); ++n) xi[n] = e(n) >= t_aud ? 1 : 0;
  return xi;
}

RVec aud_soft(const CMat& h_est, const CMat& xd_est, const AudParams& ap) {
  RVec eh = column_energies(h_est);
  RVec l(eh.size());
  for (Eigen::Index n = 0; n < eh.size(); ++n) {
    double ex = xd_est.row(n).squaredNorm();
    double arg = ap.omega_h * eh(n) + ap.omega_x * ex - ap.T_th;
    l(n) = 1.0 / (1.0 + std::exp(-arg));
  }
  return l;
}

CMat hard_decide(const CMat& xd_est, const std::vector<cplx>& constellation) {
  CMat out(xd_est.rows(), xd_est.cols());
  for (Eigen::Index n = 0; n < xd_est.rows(); ++n)
    for (Eigen::Index r = 0; r < xd_est.cols(); ++r) {
      double best = std::norm(xd_est(n, r) - constellation[0]);
      size_t arg = 0;
      for (size_t j = 1; j < constellation.size(); ++j) {
        double d = std::norm(xd_est(n, r) - constellation[j]);
        if (d < best) {  // strict: lowest index wins ties
          best = d;
          arg = j;
        }
      }
      out(n, r) = constellation[arg];
    }
  return out;
}

CMat mask_activity(const CMat& xd_hard, const std::vector<int>& xi_hat) {
  if (static_cast<Eigen::Index>(xi_hat.size()) != xd_hard.rows())
    throw std::invalid_argument("mask_activity: shape mismatch");
  CMat out = xd_hard;
  for (Eigen::Index n = 0; n < out.rows(); ++n)
    if (!xi_hat[n]) out.row(n).setZero();
  return out;
}

TrialMetrics compute_metrics(const std::vector<int>& xi_true, const CMat& xd_true,
                             const CMat& h_true, const std::vector<int>& xi_hat,
                             const CMat& xd_hard, const CMat& h_est) {
  const int n_ue = static_cast<int>(xi_true.size());
  TrialMetrics m;
  int na = 0, wrong_act = 0, hits = 0, false_act = 0;
  for (int n = 0; n < n_ue; ++n) {
    na += xi_true[n];
    wrong_act += xi_true[n] != xi_hat[n];
    hits += xi_true[n] && xi_hat[n];
    false_act += !xi_true[n] && xi_hat[n];
  }
  m.uder = static_cast<double>(wrong_act) / n_ue;

  double hnorm = h_true.squaredNorm();
  m.nmse = hnorm > 0.0 ? (h_true - h_est).squaredNorm() / hnorm
                       : (h_est.squaredNorm() > 0.0 ? 1.0 : 0.0);

  int sym_err = 0;
  for (int n = 0; n < n_ue; ++n) {
    if (!xi_true[n]) continue;
    for (Eigen::Index r = 0; r < xd_true.cols(); ++r)
      sym_err += xd_true(n, r) != xd_hard(n, r);
  }
  if (na > 0) {
    m.aser = static_cast<double>(sym_err) / (static_cast<double>(xd_true.cols()) * na);
    m.tpr = static_cast<double>(hits) / na;
  } else {
    m.aser_undefined = true;
    m.tpr = 1.0;  // nothing to detect
  }
  if (na < n_ue) {
    m.fpr = static_cast<double>(false_act) / (n_ue - na);
  } else {
    m.fpr_undefined = true;
  }
  return m;
}

std::vector<RocPoint> roc_sweep(const RVec& scores, const std::vector<int>& xi_true,
                                const std::vector<double>& thresholds) {
  int na = 0;
  for (int x : xi_true) na += x;
  const int n_ue = static_cast<int>(xi_true.size());
  std::vector<RocPoint> out;
  out.reserve(thresholds.size());
  for (double th : thresholds) {
    int hits = 0, false_act = 0;
    for (int n = 0; n < n_ue; ++n) {
      bool declared = scores(n) > th;
      if (xi_true[n] && declared) ++hits;
      if (!xi_true[n] && declared) ++false_act;
    }
    RocPoint p;
    p.threshold = th;
    p.tpr = na > 0 ? static_cast<double>(hits) / na : 1.0;
    p.fpr = n_ue > na ? static_cast<double>(false_act) / (n_ue - na) : 0.0;
    out.push_back(p);
  }
  return out;
}

}  // namespace jacd
