#include "jacd/baselines.hpp"

#include <stdexcept>

#include <Eigen/SVD>

#include "jacd/mathcore.hpp"

namespace jacd {

CMat fbs_channel_estimate(const CMat& Y_P, const CMat& X_P, double mu_h,
                          int K_iter, double tol, int M) {
  if (Y_P.cols() != X_P.cols())
    throw std::invalid_argument("fbs_channel_estimate: dimension mismatch");
  const Eigen::Index n = X_P.rows();
  CMat h = CMat::Zero(Y_P.rows(), n);

  // Convex problem: fixed Lipschitz step from the pilot Gram matrix.
  CMat gram = X_P * X_P.adjoint();
  Eigen::SelfAdjointEigenSolver<CMat> es(gram);
  double lip = es.eigenvalues().maxCoeff();
  double tau = 0.9 / std::max(lip, 1e-12);

  double prev_obj = 0.5 * Y_P.squaredNorm();
  for (int k = 0; k < K_iter; ++k) {
    CMat r = Y_P - h * X_P;
    CMat h_prev = h;
    h = backward_H(h + tau * (r * X_P.adjoint()), tau * mu_h, M);
    double obj = 0.5 * (Y_P - h * X_P).squaredNorm();
    const int blocks = static_cast<int>(h.rows()) / M;
    for (Eigen::Index c = 0; c < n; ++c)
      for (int p = 0; p < blocks; ++p)
        obj += mu_h * h.col(c).segment(p * M, M).norm();
    if (obj > 1e12 || !std::isfinite(obj))
      throw std::runtime_error("fbs_channel_estimate diverged");
    prev_obj = obj;
    double denom = h_prev.norm();
    if (denom > 0.0 && (h - h_prev).norm() / denom < tol) break;
  }
  (void)prev_obj;
  return h;
}

namespace {

// Columns of h restricted to the detected-active set.
CMat active_submatrix(const CMat& h, const std::vector<int>& xi_hat,
                      std::vector<int>& idx) {
  idx.clear();
  for (size_t n = 0; n < xi_hat.size(); ++n)
    if (xi_hat[n]) idx.push_back(static_cast<int>(n));
  CMat sub(h.rows(), idx.size());
  for (size_t j = 0; j < idx.size(); ++j) sub.col(j) = h.col(idx[j]);
  return sub;
}

}  // namespace

CMat ls_detect(const CMat& Y_D, const CMat& h_masked, const std::vector<int>& xi_hat,
               bool* rank_deficient) {
  CMat xd = CMat::Zero(h_masked.cols(), Y_D.cols());
  std::vector<int> idx;
  CMat ha = active_submatrix(h_masked, xi_hat, idx);
  if (rank_deficient) *rank_deficient = false;
  if (idx.empty()) return xd;

  Eigen::JacobiSVD<CMat> svd(ha, Eigen::ComputeThinU | Eigen::ComputeThinV);
  double tol = 1e-10 * svd.singularValues()(0);
  if (svd.singularValues().minCoeff() <= tol && rank_deficient)
    *rank_deficient = true;
  svd.setThreshold(1e-10);
  CMat sol = svd.solve(Y_D);
  for (size_t j = 0; j < idx.size(); ++j) xd.row(idx[j]) = sol.row(j);
  return xd;
}

CMat mmse_detect(const CMat& Y_D, const CMat& h_masked, const std::vector<int>& xi_hat,
                 double noise_var, double prior_var) {
  if (prior_var <= 0.0) return CMat::Zero(h_masked.cols(), Y_D.cols());
  CMat xd = CMat::Zero(h_masked.cols(), Y_D.cols());
  std::vector<int> idx;
  CMat ha = active_submatrix(h_masked, xi_hat, idx);
  if (idx.empty()) return xd;

  CMat a = ha.adjoint() * ha;
  a.diagonal().array() += noise_var / prior_var;
  CMat sol = a.ldlt().solve(ha.adjoint() * Y_D);
  for (size_t j = 0; j < idx.size(); ++j) xd.row(idx[j]) = sol.row(j);
  return xd;
}

FbsState baseline5_jacd(const CMat& Y, const CMat& X_P, const SolverParams& params,
                        FbsState init) {
  return run_unboxed_fbs(Y, X_P, params, std::move(init));
}

}  // namespace jacd
