#include "jacd/dunfold.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "jacd/baselines.hpp"
#include "jacd/mathcore.hpp"
#include "jacd/solvers.hpp"

namespace jacd {

namespace {

// Per-entry term of the quartic box regularizer gradient, -4*x*(|x|^2 - B^2).
CMat creg_term(const CMat& xd, double B) {
  const double b2 = B * B;
  return xd.unaryExpr([b2](cplx x) { return -4.0 * x * (std::norm(x) - b2); });
}

double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  double e = std::exp(a);
  return e / (1.0 + e);
}

// Reverse of out = shrink_factor(x) * x with the smoothed norm.
// Accumulates into g_x and g_mu given the adjoint of out.
void shrinkage_reverse(const CVec& x, double mu, const CVec& g_out, CVec& g_x,
                       double& g_mu) {
  const double n = std::sqrt(x.squaredNorm() + kNormEps);
  const bool gate = n > mu;
  const double c = gate ? (n - mu) / n : 0.0;
  g_x += c * g_out;
  if (!gate) return;
  const double a = g_out.cwiseProduct(x.conjugate()).sum().real();
  g_x += (a * mu / (n * n * n)) * x;
  g_mu -= a / n;
}

// Per-(n,p) block shrinkage of the channel matrix and its reverse.
CMat shrink_h(const CMat& h_hat, double mu, int M) {
  CMat out(h_hat.rows(), h_hat.cols());
  const int P = static_cast<int>(h_hat.rows()) / M;
  for (Eigen::Index n = 0; n < h_hat.cols(); ++n)
    for (int p = 0; p < P; ++p)
      out.col(n).segment(p * M, M) =
          group_shrinkage(CVec(h_hat.col(n).segment(p * M, M)), mu, true);
  return out;
}

void shrink_h_reverse(const CMat& h_hat, double mu, int M, const CMat& g_out,
                      CMat& g_hhat, double& g_mu) {
  const int P = static_cast<int>(h_hat.rows()) / M;
  CVec gblk(M);
  for (Eigen::Index n = 0; n < h_hat.cols(); ++n)
    for (int p = 0; p < P; ++p) {
      gblk.setZero();
      shrinkage_reverse(CVec(h_hat.col(n).segment(p * M, M)), mu,
                        CVec(g_out.col(n).segment(p * M, M)), gblk, g_mu);
      g_hhat.col(n).segment(p * M, M) += gblk;
    }
}

// Softmax of -|xhat - q_j|^2 / ne over the constellation.
void pme_probs(cplx xhat, const std::vector<cplx>& q, double ne,
               std::vector<double>& e, std::vector<double>& p) {
  const size_t Q = q.size();
  e.resize(Q);
  p.resize(Q);
  double emax = -std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < Q; ++j) {
    e[j] = -std::norm(xhat - q[j]) / ne;
    emax = std::max(emax, e[j]);
  }
  double z = 0.0;
  for (size_t j = 0; j < Q; ++j) {
    p[j] = std::exp(e[j] - emax);
    z += p[j];
  }
  for (double& v : p) v /= z;
}

struct LayerTape {
  CMat H_in, Xd_in, Dh_in, Dx_in;
  CMat R;       // Y - H_in [X_P, Xd_in]
  CMat At;      // H_in^H R_d
  CMat Creg;    // ABC only
  CMat Dh_out, Dx_out;
  CMat H_hat, Xd_hat;
  CMat H_out, Xd_out;
};

constexpr int kAbcScalars = 8;   // before the bias block
constexpr int kPoemScalars = 8;
constexpr int kAudScalars = 3;

int layer_len(const UnfoldedParams& p) {
  return p.variant == DuVariant::Abc ? kAbcScalars + 2 * p.R_D : kPoemScalars;
}

}  // namespace

void du_forward(const CMat& H, const CMat& Xd, MomentumState& mom,
                const LayerParams& lp, const CMat& Y, const CMat& X_P, double B,
                DuVariant variant, CMat& h_hat, CMat& xd_hat) {
  const Eigen::Index rp = X_P.cols(), rd = Xd.cols();
  CMat X(Xd.rows(), rp + rd);
  X << X_P, Xd;
  CMat R = Y - H * X;
  mom.D_h = lp.tau_h * (R * X.adjoint()) + lp.eta_h * mom.D_h;
  CMat dir = H.adjoint() * R.rightCols(rd);
  if (variant == DuVariant::Abc) dir += lp.lambda * creg_term(Xd, B);
  mom.D_x = lp.tau_x * dir + lp.eta_x * mom.D_x;
  h_hat = H + mom.D_h;
  xd_hat = Xd + mom.D_x;
}

void du_abc_backward(const CMat& h_hat, const CMat& xd_hat, const LayerParams& lp,
                     double B, int M, CMat& h_out, CMat& xd_out) {
  h_out = shrink_h(h_hat, lp.mu_h_t, M);
  xd_out.resize(xd_hat.rows(), xd_hat.cols());
  for (Eigen::Index n = 0; n < xd_hat.rows(); ++n) {
    CVec s = group_shrinkage(CVec(xd_hat.row(n).transpose()), lp.mu_x_t, true);
    CVec y = lp.omega * s + lp.bias;
    xd_out.row(n) = clamp_box(y, -B, B).transpose();
  }
}

void du_poem_backward(const CMat& h_hat, const CMat& xd_hat, const LayerParams& lp,
                      const std::vector<cplx>& constellation, int M, CMat& h_out,
                      CMat& xd_out) {
  h_out = shrink_h(h_hat, lp.mu_h_t, M);
  xd_out.resize(xd_hat.rows(), xd_hat.cols());
  for (Eigen::Index n = 0; n < xd_hat.rows(); ++n) {
    CVec row = xd_hat.row(n).transpose();
    double c = c_apme(row, lp.rho, lp.nu, true);
    for (Eigen::Index r = 0; r < row.size(); ++r)
      xd_out(n, r) = c * pme_uniform_scalar(row(r), constellation, lp.ne);
  }
}

DuOutput run_du(const CMat& Y, const CMat& X_P, const UnfoldedParams& params,
                const std::vector<cplx>& constellation, double B, int M,
                const CMat& h_init, const CMat& xd_init) {
  DuOutput out;
  out.H = h_init;
  out.Xd = xd_init;
  MomentumState mom;
  mom.D_h = CMat::Zero(h_init.rows(), h_init.cols());
  mom.D_x = CMat::Zero(xd_init.rows(), xd_init.cols());
  CMat h_hat, xd_hat;
  for (const LayerParams& lp : params.layers) {
    du_forward(out.H, out.Xd, mom, lp, Y, X_P, B, params.variant, h_hat, xd_hat);
    if (params.variant == DuVariant::Abc)
      du_abc_backward(h_hat, xd_hat, lp, B, M, out.H, out.Xd);
    else
      du_poem_backward(h_hat, xd_hat, lp, constellation, M, out.H, out.Xd);
  }
  out.scores = aud_soft(out.H, out.Xd, params.aud);
  return out;
}

double du_loss(const RVec& scores, const CMat& xd_final, const CMat& xd_true) {
  return (scores.cast<cplx>().asDiagonal() * xd_final - xd_true).squaredNorm();
}

RVec flatten_params(const UnfoldedParams& p) {
  const int ll = layer_len(p);
  RVec v(static_cast<Eigen::Index>(p.layers.size()) * ll + kAudScalars);
  Eigen::Index k = 0;
  for (const LayerParams& lp : p.layers) {
    v(k++) = lp.tau_h;
    v(k++) = lp.eta_h;
    v(k++) = lp.tau_x;
    v(k++) = lp.eta_x;
    if (p.variant == DuVariant::Abc) {
      v(k++) = lp.lambda;
      v(k++) = lp.mu_h_t;
      v(k++) = lp.mu_x_t;
      v(k++) = lp.omega;
      for (int r = 0; r < p.R_D; ++r) {
        v(k++) = lp.bias(r).real();
        v(k++) = lp.bias(r).imag();
      }
    } else {
      v(k++) = lp.mu_h_t;
      v(k++) = lp.ne;
      v(k++) = lp.rho;
      v(k++) = lp.nu;
    }
  }
  v(k++) = p.aud.omega_h;
  v(k++) = p.aud.omega_x;
  v(k++) = p.aud.T_th;
  return v;
}

UnfoldedParams unflatten_params(const RVec& v, const UnfoldedParams& shape) {
  UnfoldedParams p = shape;
  const int ll = layer_len(shape);
  if (v.size() != static_cast<Eigen::Index>(shape.layers.size()) * ll + kAudScalars)
    throw std::invalid_argument("unflatten_params: size mismatch");
  Eigen::Index k = 0;
  for (LayerParams& lp : p.layers) {
    lp.tau_h = v(k++);
    lp.eta_h = v(k++);
    lp.tau_x = v(k++);
    lp.eta_x = v(k++);
    if (p.variant == DuVariant::Abc) {
      lp.lambda = v(k++);
      lp.mu_h_t = v(k++);
      lp.mu_x_t = v(k++);
      lp.omega = v(k++);
      lp.bias.resize(p.R_D);
      for (int r = 0; r < p.R_D; ++r) {
        double re = v(k++), im = v(k++);
        lp.bias(r) = cplx(re, im);
      }
    } else {
      lp.mu_h_t = v(k++);
      lp.ne = v(k++);
      lp.rho = v(k++);
      lp.nu = v(k++);
    }
  }
  p.aud.omega_h = v(k++);
  p.aud.omega_x = v(k++);
  p.aud.T_th = v(k++);
  return p;
}

void project_params(UnfoldedParams& p) {
  for (LayerParams& lp : p.layers) {
    lp.mu_h_t = std::max(lp.mu_h_t, 0.0);
    lp.mu_x_t = std::max(lp.mu_x_t, 0.0);
    lp.ne = std::max(lp.ne, 1e-8);
  }
}

double du_loss_and_grad(const DuSample& s, const UnfoldedParams& params,
                        const std::vector<cplx>& constellation, double B, int M,
                        RVec* grad) {
  const int K = static_cast<int>(params.layers.size());
  const Eigen::Index rd = s.Xd_true.cols();
  const Eigen::Index N = s.xd_init.rows();

  // Forward pass with tape.
  std::vector<LayerTape> tape(K);
  CMat H = s.h_init, Xd = s.xd_init;
  MomentumState mom;
  mom.D_h = CMat::Zero(H.rows(), H.cols());
  mom.D_x = CMat::Zero(Xd.rows(), Xd.cols());
  for (int k = 0; k < K; ++k) {
    LayerTape& t = tape[k];
    const LayerParams& lp = params.layers[k];
    t.H_in = H;
    t.Xd_in = Xd;
    t.Dh_in = mom.D_h;
    t.Dx_in = mom.D_x;
    CMat X(N, s.X_P.cols() + rd);
    X << s.X_P, Xd;
    t.R = s.Y - H * X;
    t.At = H.adjoint() * t.R.rightCols(rd);
    CMat dir = t.At;
    if (params.variant == DuVariant::Abc) {
      t.Creg = creg_term(Xd, B);
      dir += lp.lambda * t.Creg;
    }
    mom.D_h = lp.tau_h * (t.R * X.adjoint()) + lp.eta_h * mom.D_h;
    mom.D_x = lp.tau_x * dir + lp.eta_x * mom.D_x;
    t.Dh_out = mom.D_h;
    t.Dx_out = mom.D_x;
    t.H_hat = H + mom.D_h;
    t.Xd_hat = Xd + mom.D_x;
    if (params.variant == DuVariant::Abc)
      du_abc_backward(t.H_hat, t.Xd_hat, lp, B, M, t.H_out, t.Xd_out);
    else
      du_poem_backward(t.H_hat, t.Xd_hat, lp, constellation, M, t.H_out, t.Xd_out);
    H = t.H_out;
    Xd = t.Xd_out;
  }

  // AUD head and loss.
  RVec e_h(N), e_x(N), L(N);
  for (Eigen::Index n = 0; n < N; ++n) {
    e_h(n) = H.col(n).squaredNorm();
    e_x(n) = Xd.row(n).squaredNorm();
    L(n) = sigmoid(params.aud.omega_h * e_h(n) + params.aud.omega_x * e_x(n) -
                   params.aud.T_th);
  }
  CMat E = L.cast<cplx>().asDiagonal() * Xd - s.Xd_true;
  const double loss = E.squaredNorm();
  if (grad == nullptr) return loss;

  UnfoldedParams g = params;  // gradient accumulator with the same shape
  for (LayerParams& lp : g.layers) {
    lp = LayerParams{};
    lp.omega = 0.0;
    lp.rho = 0.0;
    lp.nu = 0.0;
    lp.ne = 0.0;
    if (params.variant == DuVariant::Abc) lp.bias = CVec::Zero(rd);
  }
  g.aud = AudParams{};
  g.aud.omega_h = g.aud.omega_x = g.aud.T_th = 0.0;

  // Loss and AUD head reverse.
  CMat G_E = 2.0 * E;
  CMat G_H = CMat::Zero(H.rows(), H.cols());
  CMat G_Xd(N, rd);
  for (Eigen::Index n = 0; n < N; ++n) {
    G_Xd.row(n) = L(n) * G_E.row(n);
    const double s_n = G_E.row(n).cwiseProduct(Xd.row(n).conjugate()).sum().real();
    const double gam = s_n * L(n) * (1.0 - L(n));
    g.aud.omega_h += gam * e_h(n);
    g.aud.omega_x += gam * e_x(n);
    g.aud.T_th -= gam;
    G_H.col(n) += 2.0 * gam * params.aud.omega_h * H.col(n);
    G_Xd.row(n) += 2.0 * gam * params.aud.omega_x * Xd.row(n);
  }

  CMat G_Dh = CMat::Zero(H.rows(), H.cols());
  CMat G_Dx = CMat::Zero(N, rd);
  const double b2 = B * B;

  for (int k = K - 1; k >= 0; --k) {
    const LayerTape& t = tape[k];
    const LayerParams& lp = params.layers[k];
    LayerParams& gl = g.layers[k];

    // Backward-step reverse: (G_H, G_Xd) are adjoints of (H_out, Xd_out).
    CMat G_Hhat = CMat::Zero(H.rows(), H.cols());
    shrink_h_reverse(t.H_hat, lp.mu_h_t, M, G_H, G_Hhat, gl.mu_h_t);

    CMat G_Xdhat = CMat::Zero(N, rd);
    if (params.variant == DuVariant::Abc) {
      for (Eigen::Index n = 0; n < N; ++n) {
        CVec xrow = t.Xd_hat.row(n).transpose();
        CVec srow = group_shrinkage(xrow, lp.mu_x_t, true);
        CVec y = lp.omega * srow + lp.bias;
        CVec g_y(rd);
        for (Eigen::Index r = 0; r < rd; ++r) {
          CVec::Scalar gv = G_Xd(n, r);
          double gre = std::abs(y(r).real()) < B ? gv.real() : 0.0;
          double gim = std::abs(y(r).imag()) < B ? gv.imag() : 0.0;
          g_y(r) = cplx(gre, gim);
        }
        gl.omega += g_y.cwiseProduct(srow.conjugate()).sum().real();
        gl.bias += g_y;
        CVec g_s = lp.omega * g_y;
        CVec g_x = CVec::Zero(rd);
        shrinkage_reverse(xrow, lp.mu_x_t, g_s, g_x, gl.mu_x_t);
        G_Xdhat.row(n) += g_x.transpose();
      }
    } else {
      std::vector<double> ev, pv;
      for (Eigen::Index n = 0; n < N; ++n) {
        CVec xrow = t.Xd_hat.row(n).transpose();
        const double nsq = xrow.squaredNorm();
        if (nsq == 0.0) continue;  // c = 0 exactly, flat neighborhood
        const double nn = std::sqrt(nsq + kNormEps);
        const double u = lp.rho - lp.nu / nn;
        const double c = std::clamp(u, 0.0, 1.0);
        CVec m(rd);
        for (Eigen::Index r = 0; r < rd; ++r)
          m(r) = pme_uniform_scalar(xrow(r), constellation, lp.ne);
        CVec g_out = G_Xd.row(n).transpose();
        const double g_c = g_out.cwiseProduct(m.conjugate()).sum().real();
        CVec g_m = c * g_out;
        CVec g_x = CVec::Zero(rd);
        if (u > 0.0 && u < 1.0) {
          gl.rho += g_c;
          gl.nu -= g_c / nn;
          g_x += (g_c * lp.nu / (nn * nn * nn)) * xrow;
        }
        for (Eigen::Index r = 0; r < rd; ++r) {
          pme_probs(xrow(r), constellation, lp.ne, ev, pv);
          double wbar = 0.0;
          std::vector<double> w(constellation.size());
          for (size_t j = 0; j < constellation.size(); ++j) {
            w[j] = (std::conj(g_m(r)) * constellation[j]).real();
            wbar += pv[j] * w[j];
          }
          for (size_t j = 0; j < constellation.size(); ++j) {
            const double phi = pv[j] * (w[j] - wbar);
            g_x(r) += phi * (-2.0 / lp.ne) * (xrow(r) - constellation[j]);
            gl.ne += phi * std::norm(xrow(r) - constellation[j]) / (lp.ne * lp.ne);
          }
        }
        G_Xdhat.row(n) += g_x.transpose();
      }
    }

    // Forward-step reverse.
    CMat G_H_in = G_Hhat;
    CMat G_Xd_in = G_Xdhat;
    CMat G_Dh_tot = G_Hhat + G_Dh;
    CMat G_Dx_tot = G_Xdhat + G_Dx;

    CMat X(N, s.X_P.cols() + rd);
    X << s.X_P, t.Xd_in;
    CMat T = t.R * X.adjoint();
    gl.tau_h += re_dot(G_Dh_tot, T);
    gl.eta_h += re_dot(G_Dh_tot, t.Dh_in);
    G_Dh = lp.eta_h * G_Dh_tot;
    CMat G_T = lp.tau_h * G_Dh_tot;
    CMat G_R = G_T * X;
    CMat G_X = G_T.adjoint() * t.R;

    CMat dir = t.At;
    if (params.variant == DuVariant::Abc) dir += lp.lambda * t.Creg;
    gl.tau_x += re_dot(G_Dx_tot, dir);
    gl.eta_x += re_dot(G_Dx_tot, t.Dx_in);
    G_Dx = lp.eta_x * G_Dx_tot;
    CMat G_At = lp.tau_x * G_Dx_tot;
    if (params.variant == DuVariant::Abc) {
      gl.lambda += lp.tau_x * re_dot(G_Dx_tot, t.Creg);
      const cplx fac(lp.tau_x * lp.lambda, 0.0);
      for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < rd; ++j) {
          const cplx gf = fac * G_Dx_tot(i, j);
          const cplx x = t.Xd_in(i, j);
          G_Xd_in(i, j) +=
              (4.0 * b2 - 8.0 * std::norm(x)) * gf - 4.0 * x * x * std::conj(gf);
        }
    }
    G_H_in += t.R.rightCols(rd) * G_At.adjoint();
    G_R.rightCols(rd) += t.H_in * G_At;

    G_H_in -= G_R * X.adjoint();
    G_X -= t.H_in.adjoint() * G_R;
    G_Xd_in += G_X.rightCols(rd);

    G_H = G_H_in;
    G_Xd = G_Xd_in;
  }

  *grad = flatten_params(g);
  return loss;
}

RVec grad_params(const std::vector<DuSample>& batch, const UnfoldedParams& params,
                 const std::vector<cplx>& constellation, double B, int M,
                 double* mean_loss) {
  if (batch.empty()) throw std::invalid_argument("grad_params: empty batch");
  RVec acc;
  double loss_sum = 0.0;
  for (const DuSample& s : batch) {
    RVec gi;
    loss_sum += du_loss_and_grad(s, params, constellation, B, M, &gi);
    if (acc.size() == 0)
      acc = gi;
    else
      acc += gi;
  }
  acc /= static_cast<double>(batch.size());
  if (mean_loss != nullptr) *mean_loss = loss_sum / static_cast<double>(batch.size());
  return acc;
}

void baseline1_init(const CMat& Y, const CMat& X_P, int R_P, double mu_h,
                    int K_iter, double tol, int M, double B, CMat& h_init,
                    CMat& xd_init) {
  const Eigen::Index mp = Y.rows();
  CMat Y_P = Y.leftCols(R_P);
  CMat Y_D = Y.rightCols(Y.cols() - R_P);
  h_init = fbs_channel_estimate(Y_P, X_P, mu_h, K_iter, tol, M);
  CMat mf = (h_init.adjoint() * Y_D) / static_cast<double>(mp);
  xd_init.resize(mf.rows(), mf.cols());
  for (Eigen::Index i = 0; i < mf.rows(); ++i)
    xd_init.row(i) = clamp_box(CVec(mf.row(i).transpose()), -B, B).transpose();
}

namespace {

DuSample make_sample(const ScenarioConfig& cfg, const CMat& pilots,
                     std::uint64_t seed, double mu_h, int init_iters) {
  TrialScenario tr = make_trial(cfg, pilots, seed);
  DuSample s;
  s.Y = tr.rx.Y;
  s.X_P = tr.tx.X_P;
  s.Xd_true = tr.tx.X_D_true;
  baseline1_init(s.Y, s.X_P, cfg.R_P, mu_h, init_iters, 1e-3, cfg.M, cfg.B,
                 s.h_init, s.xd_init);
  return s;
}

double dataset_loss(const std::vector<DuSample>& set, const UnfoldedParams& p,
                    const std::vector<cplx>& q, double B, int M) {
  double acc = 0.0;
  for (const DuSample& s : set) acc += du_loss_and_grad(s, p, q, B, M, nullptr);
  return acc / static_cast<double>(set.size());
}

}  // namespace

UnfoldedParams init_unfolded_params(const ScenarioConfig& cfg, DuVariant variant,
                                    int K, double mu_h, double mu_x,
                                    std::uint64_t seed) {
  CMat pilots = generate_pilots(cfg, mix_seed(seed, 3));
  double l_acc = 0.0, res_acc = 0.0;
  const int probes = 4;
  for (int i = 0; i < probes; ++i) {
    DuSample s = make_sample(cfg, pilots, mix_seed(seed, 100 + i), mu_h, 50);
    l_acc += lipschitz_estimate(s.h_init, s.xd_init, s.Y, s.X_P);
    CMat X(s.xd_init.rows(), s.X_P.cols() + s.xd_init.cols());
    X << s.X_P, s.xd_init;
    res_acc += (s.Y - s.h_init * X).squaredNorm() /
               static_cast<double>(s.Y.rows() * s.Y.cols());
  }
  const double tau = 0.9 / (l_acc / probes);
  const double ne0 = std::max(res_acc / probes, 1e-8);

  UnfoldedParams p;
  p.variant = variant;
  p.R_D = cfg.R_D;
  p.layers.resize(K);
  for (LayerParams& lp : p.layers) {
    lp.tau_h = lp.tau_x = tau;
    lp.eta_h = lp.eta_x = 0.5;
    lp.lambda = 0.01;
    lp.mu_h_t = tau * mu_h;
    lp.mu_x_t = tau * mu_x;
    lp.omega = 1.0;
    lp.bias = CVec::Zero(cfg.R_D);
    lp.ne = ne0;
    lp.rho = 3.49;
    lp.nu = 2.46;
  }
  // Anneal the POEM denoiser noise level across layers: early layers stay
  // soft (near the initial residual level) while later layers sharpen. A
  // flat schedule starts training in a basin where weak users freeze.
  if (variant == DuVariant::Poem)
    for (int k = 0; k < K; ++k)
      p.layers[k].ne =
          ne0 * std::pow(1.0 / 30.0, K > 1 ? double(k) / (K - 1) : 0.0);
  p.aud = AudParams{};
  return p;
}

TrainResult train(const ScenarioConfig& cfg, const TrainConfig& tc,
                  UnfoldedParams params0) {
  const std::vector<cplx>& q = cfg.constellation;
  CMat pilots = generate_pilots(cfg, mix_seed(tc.seed, 3));

  const int n_val = std::max(
      1, static_cast<int>(std::lround(tc.val_fraction * tc.scenarios_per_epoch)));
  std::vector<DuSample> val;
  val.reserve(n_val);
  for (int i = 0; i < n_val; ++i)
    val.push_back(make_sample(cfg, pilots, mix_seed(tc.seed, 500000 + i),
                              tc.init_mu_h, tc.init_iters));

  TrainResult out;
  out.params = params0;
  out.initial_val_loss = dataset_loss(val, params0, q, cfg.B, cfg.M);
  out.best_val_loss = out.initial_val_loss;

  RVec theta = flatten_params(params0);
  RVec m = RVec::Zero(theta.size()), v = RVec::Zero(theta.size());
  const double b1 = 0.9, b2a = 0.999, eps = 1e-8;
  int step = 0;
  UnfoldedParams cur = params0;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    for (int i0 = 0; i0 < tc.scenarios_per_epoch; i0 += tc.batch) {
      const int bsz = std::min(tc.batch, tc.scenarios_per_epoch - i0);
      std::vector<DuSample> batch;
      batch.reserve(bsz);
      for (int j = 0; j < bsz; ++j)
        batch.push_back(make_sample(
            cfg, pilots,
            mix_seed(tc.seed, 1000000ull * (epoch + 1) + i0 + j), tc.init_mu_h,
            tc.init_iters));
      double batch_loss = 0.0;
      RVec grad = grad_params(batch, cur, q, cfg.B, cfg.M, &batch_loss);
      if (!std::isfinite(batch_loss) || !grad.allFinite()) {
        out.aborted = true;
        return out;
      }
      ++step;
      m = b1 * m + (1.0 - b1) * grad;
      v = b2a * v + (1.0 - b2a) * grad.cwiseProduct(grad);
      const double bc1 = 1.0 - std::pow(b1, step);
      const double bc2 = 1.0 - std::pow(b2a, step);
      theta -= (tc.lr / bc1) * m.cwiseQuotient(
                   ((v / bc2).cwiseSqrt().array() + eps).matrix());
      cur = unflatten_params(theta, params0);
      project_params(cur);
      theta = flatten_params(cur);
    }
    const double vl = dataset_loss(val, cur, q, cfg.B, cfg.M);
    if (tc.verbose)
      std::cerr << "epoch " << epoch << " val_loss " << vl << "\n";
    if (!std::isfinite(vl)) {
      out.aborted = true;
      return out;
    }
    if (vl < out.best_val_loss) {
      out.best_val_loss = vl;
      out.params = cur;
    }
  }
  return out;
}

std::string serialize_params(const UnfoldedParams& p) {
  std::ostringstream os;
  os.precision(17);
  os << std::scientific;
  os << "jacd-du-params v1\n";
  os << "variant " << (p.variant == DuVariant::Abc ? "abc" : "poem") << "\n";
  os << "K " << p.layers.size() << "\n";
  os << "R_D " << p.R_D << "\n";
  os << "aud " << p.aud.omega_h << " " << p.aud.omega_x << " " << p.aud.T_th
     << " " << p.aud.L_bar << " " << p.aud.T_aud << "\n";
  for (const LayerParams& lp : p.layers) {
    os << "layer " << lp.tau_h << " " << lp.eta_h << " " << lp.tau_x << " "
       << lp.eta_x << " " << lp.lambda << " " << lp.mu_h_t << " " << lp.mu_x_t
       << " " << lp.omega << " " << lp.ne << " " << lp.rho << " " << lp.nu;
    if (p.variant == DuVariant::Abc)
      for (int r = 0; r < p.R_D; ++r)
        os << " " << lp.bias(r).real() << " " << lp.bias(r).imag();
    os << "\n";
  }
  return os.str();
}

UnfoldedParams deserialize_params(const std::string& text) {
  std::istringstream is(text);
  std::string tag, ver;
  is >> tag >> ver;
  if (tag != "jacd-du-params" || ver != "v1")
    throw std::runtime_error("unrecognized parameter file header");
  UnfoldedParams p;
  std::string key;
  std::size_t K = 0;
  while (is >> key) {
    if (key == "variant") {
      std::string v;
      is >> v;
      if (v == "abc")
        p.variant = DuVariant::Abc;
      else if (v == "poem")
        p.variant = DuVariant::Poem;
      else
        throw std::runtime_error("unknown variant: " + v);
    } else if (key == "K") {
      is >> K;
    } else if (key == "R_D") {
      is >> p.R_D;
    } else if (key == "aud") {
      is >> p.aud.omega_h >> p.aud.omega_x >> p.aud.T_th >> p.aud.L_bar >>
          p.aud.T_aud;
    } else if (key == "layer") {
      LayerParams lp;
      is >> lp.tau_h >> lp.eta_h >> lp.tau_x >> lp.eta_x >> lp.lambda >>
          lp.mu_h_t >> lp.mu_x_t >> lp.omega >> lp.ne >> lp.rho >> lp.nu;
      if (p.variant == DuVariant::Abc) {
        lp.bias.resize(p.R_D);
        for (int r = 0; r < p.R_D; ++r) {
          double re, im;
          is >> re >> im;
          lp.bias(r) = cplx(re, im);
        }
      }
      p.layers.push_back(std::move(lp));
    } else {
      throw std::runtime_error("unknown key in parameter file: " + key);
    }
  }
  if (p.layers.size() != K)
    throw std::runtime_error("parameter file layer count mismatch");
  return p;
}

void save_params(const UnfoldedParams& p, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << serialize_params(p);
}

UnfoldedParams load_params(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_params(ss.str());
}

}  // namespace jacd
