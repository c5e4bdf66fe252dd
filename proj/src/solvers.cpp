#include "jacd/solvers.hpp"

#include <cmath>
#include <stdexcept>

#include "jacd/mathcore.hpp"

namespace jacd {

namespace {

constexpr double kDivergenceLimit = 1e12;

CMat join_x(const CMat& X_P, const CMat& Xd) {
  CMat x(X_P.rows(), X_P.cols() + Xd.cols());
  x.leftCols(X_P.cols()) = X_P;
  x.rightCols(Xd.cols()) = Xd;
  return x;
}

// lambda_max via power iteration on a Hermitian PSD matrix.
double spectral_radius(const CMat& a, int iters = 50) {
  if (a.rows() == 0) return 0.0;
  CVec v = CVec::Ones(a.rows());
  v.normalize();
  double lam = 0.0;
  for (int i = 0; i < iters; ++i) {
    CVec w = a * v;
    lam = w.norm();
    if (lam == 0.0) return 0.0;
    v = w / lam;
  }
  return lam;
}

}  // namespace

void gradient_f(const CMat& H, const CMat& Xd, const CMat& Y, const CMat& X_P,
                double lambda, double B, CMat& grad_H, CMat& grad_Xd) {
  if (H.cols() != X_P.rows() || H.cols() != Xd.rows() ||
      Y.cols() != X_P.cols() + Xd.cols() || Y.rows() != H.rows())
    throw std::invalid_argument("gradient_f: dimension mismatch");
  CMat x = join_x(X_P, Xd);
  CMat r = Y - H * x;
  grad_H = -r * x.adjoint();
  grad_Xd = -(H.adjoint() * r.rightCols(Xd.cols()));
  if (lambda != 0.0) {
    // d/d(Re,Im) of -lambda*||X.*conj(X) - B^2||^2.
    grad_Xd -= 4.0 * lambda *
               Xd.cwiseProduct((Xd.cwiseAbs2().array() - B * B).matrix().cast<cplx>());
  }
}

double objective_f(const CMat& H, const CMat& Xd, const CMat& Y, const CMat& X_P,
                   double lambda, double B) {
  double fid = 0.5 * (Y - H * join_x(X_P, Xd)).squaredNorm();
  if (lambda != 0.0)
    fid -= lambda * (Xd.cwiseAbs2().array() - B * B).square().sum();
  return fid;
}

double objective_p2(const FbsState& state, const CMat& Y, const CMat& X_P,
                    const SolverParams& params) {
  double obj = objective_f(state.H, state.Xd, Y, X_P, params.lambda, params.B);
  const int blocks = static_cast<int>(state.H.rows()) / params.M;
  for (Eigen::Index n = 0; n < state.H.cols(); ++n)
    for (int p = 0; p < blocks; ++p)
      obj += params.mu_h * state.H.col(n).segment(p * params.M, params.M).norm();
  for (Eigen::Index n = 0; n < state.Xd.rows(); ++n)
    obj += params.mu_x * state.Xd.row(n).norm();
  return obj;
}

double lipschitz_estimate(const CMat& H, const CMat& Xd, const CMat& Y,
                          const CMat& X_P) {
  CMat x = join_x(X_P, Xd);
  double lx = spectral_radius(x * x.adjoint());
  double lh = spectral_radius(H.adjoint() * H);
  // The residual term guards the bilinear cross-curvature so a joint step
  // at 0.9/L keeps the FBS majorization valid.
  double lr = (Y - H * x).norm();
  return 2.0 * (lx + lh) + lr;
}

void fbs_forward(CMat& H, CMat& Xd, const CMat& Y, const CMat& X_P, double tau,
                 double lambda, double B) {
  CMat gh, gx;
  gradient_f(H, Xd, Y, X_P, lambda, B, gh, gx);
  H -= tau * gh;
  Xd -= tau * gx;
}

CMat backward_H(const CMat& h_hat, double kappa, int M) {
  if (kappa < 0.0) throw std::invalid_argument("backward_H: kappa < 0");
  if (h_hat.rows() % M != 0) throw std::invalid_argument("backward_H: bad block size");
  CMat h(h_hat.rows(), h_hat.cols());
  const int blocks = static_cast<int>(h_hat.rows()) / M;
  for (Eigen::Index n = 0; n < h_hat.cols(); ++n)
    for (int p = 0; p < blocks; ++p)
      h.col(n).segment(p * M, M) =
          group_shrinkage(CVec(h_hat.col(n).segment(p * M, M)), kappa);
  return h;
}

CMat backward_Xd_box(const CMat& xd_hat, double kappa, double B) {
  CMat xd(xd_hat.rows(), xd_hat.cols());
  for (Eigen::Index n = 0; n < xd_hat.rows(); ++n)
    xd.row(n) = prox_box_group(CVec(xd_hat.row(n).transpose()), kappa, B).transpose();
  return xd;
}

CMat backward_Xd_pme(const CMat& xd_hat, const std::vector<cplx>& constellation,
                     double alpha, double ne) {
  CMat xd(xd_hat.rows(), xd_hat.cols());
  for (Eigen::Index n = 0; n < xd_hat.rows(); ++n)
    xd.row(n) =
        pme_exact(CVec(xd_hat.row(n).transpose()), constellation, alpha, ne).transpose();
  return xd;
}

CMat backward_Xd_pme_factorized(const CMat& xd_hat,
                                const std::vector<cplx>& constellation,
                                double alpha, double ne) {
  CMat xd(xd_hat.rows(), xd_hat.cols());
  for (Eigen::Index n = 0; n < xd_hat.rows(); ++n) {
    CVec row = xd_hat.row(n).transpose();
    double c = c_pme(row, constellation, alpha, ne);
    for (Eigen::Index r = 0; r < row.size(); ++r)
      xd(n, r) = c * pme_uniform_scalar(row(r), constellation, ne);
  }
  return xd;
}

namespace {

enum class BackwardKind { Box, Pme, Unboxed };

FbsState run_fbs_loop(const CMat& Y, const CMat& X_P, const SolverParams& params,
                      const std::vector<cplx>* constellation, double alpha,
                      const std::vector<double>& ne_schedule, FbsState state,
                      BackwardKind kind) {
  if (params.K < 0) throw std::invalid_argument("run_fbs: K < 0");
  state.objective_trace.clear();
  state.objective_trace.push_back(objective_p2(state, Y, X_P, params));
  double tau = params.tau;

  for (int k = 0; k < params.K; ++k) {
    if (params.tau == 0.0 && k % 10 == 0)
      tau = 0.9 / lipschitz_estimate(state.H, state.Xd, Y, X_P);

    CMat h_prev = state.H, xd_prev = state.Xd;
    fbs_forward(state.H, state.Xd, Y, X_P, tau,
                kind == BackwardKind::Box ? params.lambda : 0.0, params.B);
    state.H = backward_H(state.H, tau * params.mu_h, params.M);
    switch (kind) {
      case BackwardKind::Box:
        state.Xd = backward_Xd_box(state.Xd, tau * params.mu_x, params.B);
        break;
      case BackwardKind::Unboxed:
        for (Eigen::Index n = 0; n < state.Xd.rows(); ++n)
          state.Xd.row(n) =
              group_shrinkage(CVec(state.Xd.row(n).transpose()), tau * params.mu_x)
                  .transpose();
        break;
      case BackwardKind::Pme: {
        // Default schedule: current residual mse, recomputed per iteration
        // so the denoiser sharpens as the fit improves.
        double ne;
        if (ne_schedule.empty()) {
          CMat x = join_x(X_P, state.Xd);
          ne = std::max((Y - state.H * x).squaredNorm() /
                            static_cast<double>(Y.rows() * Y.cols()),
                        1e-8);
        } else {
          ne = ne_schedule[std::min<size_t>(k, ne_schedule.size() - 1)];
        }
        CMat denoised =
            backward_Xd_pme_factorized(state.Xd, *constellation, alpha, ne);
        state.Xd = params.pme_damping * denoised +
                   (1.0 - params.pme_damping) * state.Xd;
        break;
      }
    }
    state.iterations = k + 1;
    double obj = objective_p2(state, Y, X_P, params);
    state.objective_trace.push_back(obj);
    if (!std::isfinite(obj) || obj > kDivergenceLimit)
      throw std::runtime_error("FBS diverged: objective " + std::to_string(obj) +
                               " at iteration " + std::to_string(k + 1));

    double denom = std::sqrt(h_prev.squaredNorm() + xd_prev.squaredNorm());
    double change = std::sqrt((state.H - h_prev).squaredNorm() +
                              (state.Xd - xd_prev).squaredNorm());
    if (denom > 0.0 && change / denom < params.tol) break;
  }
  return state;
}

}  // namespace

FbsState run_box_fbs(const CMat& Y, const CMat& X_P, const SolverParams& params,
                     FbsState init) {
  return run_fbs_loop(Y, X_P, params, nullptr, 0.0, {}, std::move(init),
                      BackwardKind::Box);
}

FbsState run_pme_jacd(const CMat& Y, const CMat& X_P, const SolverParams& params,
                      const std::vector<cplx>& constellation, double alpha,
                      std::vector<double> ne_schedule, FbsState init) {
  SolverParams p = params;
  p.lambda = 0.0;  // PME variant never uses the penalty
  return run_fbs_loop(Y, X_P, p, &constellation, alpha, ne_schedule,
                      std::move(init), BackwardKind::Pme);
}

FbsState run_unboxed_fbs(const CMat& Y, const CMat& X_P, const SolverParams& params,
                         FbsState init) {
  SolverParams p = params;
  p.lambda = 0.0;
  return run_fbs_loop(Y, X_P, p, nullptr, 0.0, {}, std::move(init),
                      BackwardKind::Unboxed);
}

}  // namespace jacd
