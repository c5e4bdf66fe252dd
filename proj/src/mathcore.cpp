#include "jacd/mathcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace jacd {

namespace {

double smoothed_norm(double sq_norm) { return std::sqrt(sq_norm + kNormEps); }

double shrink_factor(double norm_sq, double mu, bool smoothed) {
  double n = smoothed ? smoothed_norm(norm_sq) : std::sqrt(norm_sq);
  if (n == 0.0) return 0.0;
  return std::max(n - mu, 0.0) / n;
}

}  // namespace

CVec group_shrinkage(const CVec& x, double mu, bool smoothed) {
  if (mu < 0.0) throw std::invalid_argument("group_shrinkage: mu < 0");
  return x * shrink_factor(x.squaredNorm(), mu, smoothed);
}

RVec group_shrinkage(const RVec& x, double mu, bool smoothed) {
  if (mu < 0.0) throw std::invalid_argument("group_shrinkage: mu < 0");
  return x * shrink_factor(x.squaredNorm(), mu, smoothed);
}

cplx clamp_box(cplx x, double lo, double hi) {
  return {std::clamp(x.real(), lo, hi), std::clamp(x.imag(), lo, hi)};
}

CVec clamp_box(const CVec& x, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clamp_box: lo > hi");
  CVec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = clamp_box(x(i), lo, hi);
  return out;
}

namespace {

double quartic_eval(const QuarticCoeffs& c, double b) {
  return ((2.0 * c.c1 * b - 4.0 * c.c1) * b + (2.0 * c.c1 + c.c2 + c.c3)) * b * b -
         2.0 * c.c2 * b + c.c2;
}

double quartic_deriv(const QuarticCoeffs& c, double b) {
  return ((8.0 * c.c1 * b - 12.0 * c.c1) * b + 2.0 * (2.0 * c.c1 + c.c2 + c.c3)) * b -
         2.0 * c.c2;
}

}  // namespace

std::vector<double> solve_prox_quartic(const QuarticCoeffs& c) {
  if (c.c2 == 0) {
    // The quartic factors as b^2 * (2*C1*b^2 - 4*C1*b + 2*C1 + C3); the
    // b = 0 factor is the sentinel, the quadratic gives b = 1 ± sqrt(-C3/(2*C1)).
    if (c.c1 <= 0.0) return {};
    const double s = std::sqrt(std::max(-c.c3 / (2.0 * c.c1), 0.0));
    const double b = 1.0 - s;
    if (b > 1e-12) return {b};
    return {};
  }

  // Ascending coefficients of the quartic.
  std::vector<double> a = {static_cast<double>(c.c2), -2.0 * c.c2,
                           2.0 * c.c1 + c.c2 + c.c3, -4.0 * c.c1, 2.0 * c.c1};
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return {};
  while (a.size() > 1 && std::abs(a.back()) < 1e-14 * scale) a.pop_back();
  int deg = static_cast<int>(a.size()) - 1;
  if (deg < 1) return {};

  // Companion-matrix roots. Repeated real roots can surface as conjugate
  // pairs with small imaginary parts, so the filter is loose and the Newton
  // polish plus a residual check decide acceptance.
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -a[i] / a[deg];
  comp.block(1, 0, deg - 1, deg - 1).setIdentity();
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, /*computeEigenvectors=*/false);

  std::vector<double> roots;
  std::vector<double> cands;
  for (int i = 0; i < deg; ++i) {
    auto ev = es.eigenvalues()(i);
    if (std::abs(ev.imag()) > 1e-4 * (1.0 + std::abs(ev.real()))) continue;
    cands.push_back(ev.real());
  }
  cands.push_back(1.0);  // b = 1 is exact whenever C3 = 0 (kappa = 0)
  for (double b : cands) {
    for (int it = 0; it < 8; ++it) {
      double d = quartic_deriv(c, b);
      if (std::abs(d) < 1e-300) break;
      double step = quartic_eval(c, b) / d;
      b -= step;
      if (std::abs(step) < 1e-15) break;
    }
    if (std::abs(quartic_eval(c, b)) > 1e-8 * scale) continue;
    if (b > 1e-12 && b <= 1.0 + 1e-12) roots.push_back(std::min(b, 1.0));
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](double x, double y) { return std::abs(x - y) < 1e-10; }),
              roots.end());
  return roots;
}

double prox_objective(const CVec& x, const CVec& xhat, double kappa) {
  return 0.5 * (x - xhat).squaredNorm() + kappa * x.norm();
}

CVec prox_box_group(const CVec& xhat, double kappa, double B) {
  if (kappa < 0.0) throw std::invalid_argument("prox_box_group: kappa < 0");
  if (B <= 0.0) throw std::invalid_argument("prox_box_group: B <= 0");
  const Eigen::Index rd = xhat.size();
  if (xhat.squaredNorm() == 0.0) return CVec::Zero(rd);
  if (kappa == 0.0) return clamp_box(xhat, -B, B);

  // Stacked real representation r_hat = [Re; Im].
  RVec rhat(2 * rd);
  rhat.head(rd) = xhat.real();
  rhat.tail(rd) = xhat.imag();

  auto assemble = [&](double b, const std::vector<bool>& clipped) {
    RVec r = RVec::Zero(2 * rd);
    if (b != 0.0) {
      for (Eigen::Index d = 0; d < 2 * rd; ++d)
        r(d) = clipped[d] ? std::copysign(B, rhat(d))
                          : std::clamp(b * rhat(d), -B, B);
    }
    CVec x(rd);
    x.real() = r.head(rd);
    x.imag() = r.tail(rd);
    return x;
  };

  RVec rtmp = group_shrinkage(rhat, kappa);
  std::vector<bool> clipped(2 * rd);
  for (Eigen::Index d = 0; d < 2 * rd; ++d) clipped[d] = std::abs(rtmp(d)) > B;

  // The clip sets and the scale are mutually dependent: the quartic solved
  // for one set can push further free entries past the box, so refine to a
  // fixed point, keeping every intermediate candidate for the final
  // objective-based pick.
  CVec best = assemble(0.0, clipped);
  double best_obj = prox_objective(best, xhat, kappa);
  for (int pass = 0; pass < static_cast<int>(2 * rd) + 1; ++pass) {
    QuarticCoeffs qc;
    qc.c3 = -2.0 * kappa * kappa;
    double c1 = 0.0;
    int nclip = 0;
    for (Eigen::Index d = 0; d < 2 * rd; ++d) {
      if (clipped[d]) ++nclip;
      else c1 += rhat(d) * rhat(d);
    }
    qc.c1 = c1;
    // Each clipped real coordinate contributes B^2 to ||x||^2; the quartic
    // carries that mass with a factor of two.
    qc.c2 = 2.0 * nclip * B * B;

    double pass_best_b = 0.0, pass_best_obj = std::numeric_limits<double>::max();
    for (double b : solve_prox_quartic(qc)) {
      CVec cand = assemble(b, clipped);
      double obj = prox_objective(cand, xhat, kappa);
      if (obj < pass_best_obj) {
        pass_best_obj = obj;
        pass_best_b = b;
      }
      if (obj < best_obj) {
        best_obj = obj;
        best = cand;
      }
    }
    if (pass_best_b == 0.0) break;
    std::vector<bool> next(2 * rd);
    bool changed = false;
    for (Eigen::Index d = 0; d < 2 * rd; ++d) {
      next[d] = std::abs(pass_best_b * rhat(d)) > B;
      changed = changed || next[d] != clipped[d];
    }
    if (!changed) break;
    clipped = std::move(next);
  }
  return best;
}

namespace {

double log_sum_exp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

cplx pme_uniform_scalar(cplx xhat, const std::vector<cplx>& constellation,
                        double ne) {
  if (ne <= 0.0) throw std::invalid_argument("pme_uniform_scalar: Ne <= 0");
  double mx = -std::numeric_limits<double>::infinity();
  std::vector<double> lw(constellation.size());
  for (size_t j = 0; j < constellation.size(); ++j) {
    lw[j] = -std::norm(xhat - constellation[j]) / ne;
    mx = std::max(mx, lw[j]);
  }
  cplx num = 0.0;
  double den = 0.0;
  for (size_t j = 0; j < constellation.size(); ++j) {
    double w = std::exp(lw[j] - mx);
    num += w * constellation[j];
    den += w;
  }
  return num / den;
}

double c_pme(const CVec& xhat, const std::vector<cplx>& constellation,
             double alpha, double ne) {
  if (ne <= 0.0) throw std::invalid_argument("c_pme: Ne <= 0");
  if (alpha <= 0.0 || alpha > 1.0) throw std::invalid_argument("c_pme: bad alpha");
  if (alpha == 1.0) return 1.0;
  // log of |Q|^Rd * CN(0; xhat) / sum_{x in Q^Rd} CN(x; xhat), with the sum
  // factorized per entry.
  double log_ratio = -xhat.squaredNorm() / ne;
  for (Eigen::Index r = 0; r < xhat.size(); ++r) {
    std::vector<double> lw(constellation.size());
    for (size_t j = 0; j < constellation.size(); ++j)
      lw[j] = -std::norm(xhat(r) - constellation[j]) / ne;
    log_ratio += std::log(static_cast<double>(constellation.size())) - log_sum_exp(lw);
  }
  if (log_ratio > 0.0) {
    double e = std::exp(-log_ratio);
    return alpha * e / (alpha * e + (1.0 - alpha));
  }
  return alpha / (alpha + (1.0 - alpha) * std::exp(log_ratio));
}

double c_apme(const CVec& xhat, double rho, double nu, bool smoothed) {
  double nsq = xhat.squaredNorm();
  if (nsq == 0.0) return 0.0;
  double n = smoothed ? smoothed_norm(nsq) : std::sqrt(nsq);
  return std::clamp(rho - nu / n, 0.0, 1.0);
}

CVec pme_exact(const CVec& xhat, const std::vector<cplx>& constellation,
               double alpha, double ne) {
  if (ne <= 0.0) throw std::invalid_argument("pme_exact: Ne <= 0");
  const Eigen::Index rd = xhat.size();
  const size_t q = constellation.size();
  double combos = std::pow(static_cast<double>(q), static_cast<double>(rd));
  if (rd > 8 || combos > 1e6)
    throw std::invalid_argument("pme_exact: enumeration too large");
  const size_t total = static_cast<size_t>(combos);

  // Log-weights over all atoms: the |Q|^Rd constellation vectors plus the
  // zero vector of the mixed prior.
  std::vector<double> lw(total + 1);
  std::vector<CVec> atoms(total);
  double log_unif = std::log(alpha) - rd * std::log(static_cast<double>(q));
  for (size_t idx = 0; idx < total; ++idx) {
    CVec x(rd);
    size_t t = idx;
    for (Eigen::Index r = 0; r < rd; ++r) {
      x(r) = constellation[t % q];
      t /= q;
    }
    lw[idx] = log_unif - (xhat - x).squaredNorm() / ne;
    atoms[idx] = std::move(x);
  }
  lw[total] = (alpha < 1.0 ? std::log(1.0 - alpha) : -std::numeric_limits<double>::infinity()) -
              xhat.squaredNorm() / ne;

  double lz = log_sum_exp(lw);
  CVec mean = CVec::Zero(rd);
  for (size_t idx = 0; idx < total; ++idx)
    mean += std::exp(lw[idx] - lz) * atoms[idx];
  return mean;
}

}  // namespace jacd
