#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "jacd/mathcore.hpp"

using namespace jacd;

namespace {

constexpr double kB = 0.7071067811865476;

// Objective of the box-constrained group prox problem.
double box_prox_objective(const CVec& x, const CVec& xhat, double kappa) {
  return 0.5 * (x - xhat).squaredNorm() + kappa * x.norm();
}

// Independent projected-gradient oracle for the box-constrained group prox:
// subgradient descent on 0.5||x - xhat||^2 + kappa*||x|| with projection
// onto the box after every step.
CVec pgd_box_prox_oracle(const CVec& xhat, double kappa, double B, int iters,
                         double step) {
  CVec x = clamp_box(xhat, -B, B);
  for (int it = 0; it < iters; ++it) {
    CVec g = x - xhat;
    double n = x.norm();
    if (n > 1e-12) g += (kappa / n) * x;
    x = clamp_box(CVec(x - step * g), -B, B);
  }
  return x;
}

// Dense-scan root oracle for the prox quartic: sign changes on a fine grid
// over (0,1], refined by bisection.
std::vector<double> quartic_scan_oracle(const QuarticCoeffs& c) {
  auto f = [&](double b) {
    return ((2.0 * c.c1 * b - 4.0 * c.c1) * b + (2.0 * c.c1 + c.c2 + c.c3)) * b * b -
           2.0 * c.c2 * b + c.c2;
  };
  std::vector<double> roots;
  const double h = 1e-6;
  double prev = f(h);
  for (double b = 2 * h; b <= 1.0 + h / 2; b += h) {
    double cur = f(b);
    if (prev == 0.0) roots.push_back(b - h);
    else if (prev * cur < 0.0) {
      double lo = b - h, hi = b;
      for (int i = 0; i < 80; ++i) {
        double mid = 0.5 * (lo + hi);
        (f(lo) * f(mid) <= 0.0 ? hi : lo) = mid;
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev = cur;
  }
  return roots;
}

std::mt19937_64 rng(12345);

CVec random_cvec(int n, double scale = 1.0) {
  std::normal_distribution<double> g;
  CVec v(n);
  for (int i = 0; i < n; ++i) v(i) = scale * cplx(g(rng), g(rng));
  return v;
}

}  // namespace

TEST_CASE("group shrinkage closed forms") {
  CHECK(group_shrinkage(CVec::Zero(3).eval(), 1.0).norm() == 0.0);

  CVec x1(1);
  x1 << cplx(2.0, 0.0);
  CHECK(std::abs(group_shrinkage(x1, 0.5)(0) - cplx(1.5, 0.0)) < 1e-15);

  CVec x2(1);
  x2 << cplx(3.0, 4.0);
  CHECK(group_shrinkage(x2, 5.0).norm() == 0.0);

  CHECK_THROWS_AS(group_shrinkage(x1, -0.1), std::invalid_argument);
}

TEST_CASE("group shrinkage is non-expansive") {
  for (int t = 0; t < 200; ++t) {
    CVec x = random_cvec(5, 2.0), y = random_cvec(5, 2.0);
    double mu = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    CHECK((group_shrinkage(x, mu) - group_shrinkage(y, mu)).norm() <=
          (x - y).norm() + 1e-12);
  }
}

TEST_CASE("smoothed shrinkage stays finite at zero and matches plain away from it") {
  CVec z = CVec::Zero(4);
  CHECK(group_shrinkage(z, 0.0, true).allFinite());
  CVec x = random_cvec(4);
  CHECK((group_shrinkage(x, 0.3, true) - group_shrinkage(x, 0.3)).norm() < 1e-12);
}

TEST_CASE("clamp box") {
  CVec in(1);
  in << cplx(0.1, -0.2);
  CHECK((clamp_box(in, -kB, kB) - in).norm() == 0.0);

  in << cplx(1.7, -0.3);
  CVec out = clamp_box(in, -0.7071, 0.7071);
  CHECK(out(0) == cplx(0.7071, -0.3));

  in << cplx(-9.0, -9.0);
  out = clamp_box(in, -0.5, 0.5);
  CHECK(out(0) == cplx(-0.5, -0.5));

  CHECK_THROWS_AS(clamp_box(in, 1.0, -1.0), std::invalid_argument);
}

TEST_CASE("prox quartic: empty clip set factors to the shrinkage coefficient") {
  // C2=0: the quartic reduces to 2*C1*b^2*(b-1)^2 + C3*b^2 = 0 on (0,1],
  // giving b = (sqrt(C1) - tau*mu)/sqrt(C1) = 1 - tau*mu/sqrt(C1).
  QuarticCoeffs c{4.0, 0, -2.0};  // tau*mu = 1
  auto roots = solve_prox_quartic(c);
  REQUIRE(!roots.empty());
  bool found = false;
  for (double b : roots) found = found || std::abs(b - 0.5) < 1e-10;
  CHECK(found);
}

TEST_CASE("prox quartic: no root when the shrinkage kills the vector") {
  // C1 < (tau*mu)^2 means ||rtmp|| would be negative: no root in (0,1].
  QuarticCoeffs c{0.25, 0, -2.0};  // tau*mu = 1, C1 = 0.25
  CHECK(solve_prox_quartic(c).empty());
}

TEST_CASE("prox quartic matches dense-scan oracle on random coefficients") {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    QuarticCoeffs c;
    c.c1 = 10.0 * u(rng);
    c.c2 = static_cast<int>(8 * u(rng));
    double taumu = 2.0 * u(rng);
    c.c3 = -2.0 * taumu * taumu;
    auto got = solve_prox_quartic(c);
    auto want = quartic_scan_oracle(c);
    for (double w : want) {
      if (w < 1e-5 || w > 1.0 - 1e-9) continue;  // scan endpoints are fuzzy
      double best = 1e9;
      for (double g : got) best = std::min(best, std::abs(g - w));
      CHECK(best < 1e-8);
      ++checked;
    }
  }
  CHECK(checked > 20);  // the distribution must actually exercise roots
}

TEST_CASE("prox_box_group reduces to shrinkage when nothing clips") {
  for (int t = 0; t < 50; ++t) {
    CVec xhat = random_cvec(6, 0.2);
    double kappa = 0.1;
    CVec shr = group_shrinkage(xhat, kappa);
    if (shr.cwiseAbs().maxCoeff() >= kB) continue;
    bool in_box = true;
    for (int i = 0; i < 6; ++i)
      in_box = in_box && std::abs(shr(i).real()) <= kB &&
               std::abs(shr(i).imag()) <= kB;
    if (!in_box) continue;
    CHECK((prox_box_group(xhat, kappa, kB) - shr).norm() < 1e-10);
  }
}

TEST_CASE("prox_box_group with kappa=0 is the box projection") {
  for (int t = 0; t < 50; ++t) {
    CVec xhat = random_cvec(5, 2.0);
    CHECK((prox_box_group(xhat, 0.0, kB) - clamp_box(xhat, -kB, kB)).norm() <
          1e-12);
  }
}

TEST_CASE("prox_box_group zero input maps to zero") {
  CHECK(prox_box_group(CVec::Zero(4).eval(), 0.7, kB).norm() == 0.0);
}

TEST_CASE("prox_box_group beats the projected-gradient oracle") {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 60; ++t) {
    int rd = 1 + static_cast<int>(7 * u(rng));
    CVec xhat = random_cvec(rd, 1.5);
    double kappa = 2.0 * u(rng);
    // Vary the box half-width: the scale/clip coupling depends on B.
    double B = t % 3 == 0 ? kB : 0.3 + 1.2 * u(rng);
    CVec got = prox_box_group(xhat, kappa, B);
    for (int i = 0; i < rd; ++i) {
      CHECK(std::abs(got(i).real()) <= B + 1e-12);
      CHECK(std::abs(got(i).imag()) <= B + 1e-12);
    }
    CVec oracle = pgd_box_prox_oracle(xhat, kappa, B, 10000, 1e-3);
    CHECK(box_prox_objective(got, xhat, kappa) <=
          box_prox_objective(oracle, xhat, kappa) + 1e-6);
  }
}

TEST_CASE("scalar PME closed forms") {
  std::vector<cplx> qpsk = {cplx(kB, kB), cplx(kB, -kB), cplx(-kB, kB),
                            cplx(-kB, -kB)};
  CHECK(std::abs(pme_uniform_scalar(cplx(0, 0), qpsk, 0.7)) < 1e-15);

  // For QPSK the posterior mean separates into B*tanh(2B*Re/Ne) per part.
  cplx xhat(0.3, 0.1);
  double ne = 0.5;
  cplx want(kB * std::tanh(2 * kB * 0.3 / ne), kB * std::tanh(2 * kB * 0.1 / ne));
  CHECK(std::abs(pme_uniform_scalar(xhat, qpsk, ne) - want) < 1e-12);
  CHECK(std::abs(want - cplx(0.488, 0.195)) < 1e-3);

  CHECK(std::abs(pme_uniform_scalar(cplx(5, -3), qpsk, 1e9)) < 1e-6);
  CHECK_THROWS_AS(pme_uniform_scalar(xhat, qpsk, 0.0), std::invalid_argument);
}

TEST_CASE("exact PME limits") {
  std::vector<cplx> qpsk = {cplx(kB, kB), cplx(kB, -kB), cplx(-kB, kB),
                            cplx(-kB, -kB)};
  CVec z = CVec::Zero(1);
  CHECK(pme_exact(z, qpsk, 1.0, 0.3).norm() < 1e-14);

  CVec far(2);
  far << cplx(0.6, 0.8), cplx(-0.9, -0.5);
  CVec lim = pme_exact(far, qpsk, 0.2, 1e-4);
  CHECK(std::abs(lim(0) - cplx(kB, kB)) < 1e-9);
  CHECK(std::abs(lim(1) - cplx(-kB, -kB)) < 1e-9);

  CHECK_THROWS(pme_exact(CVec::Zero(20).eval(), qpsk, 0.2, 0.3));
}

TEST_CASE("exact PME equals the factorized form") {
  std::vector<cplx> qpsk = {cplx(kB, kB), cplx(kB, -kB), cplx(-kB, kB),
                            cplx(-kB, -kB)};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double alpha : {0.05, 0.2, 0.5}) {
    for (int t = 0; t < 30; ++t) {
      int rd = 1 + static_cast<int>(6 * u(rng));
      CVec xhat = random_cvec(rd, 1.0);
      double ne = 0.05 + 1.95 * u(rng);
      CVec exact = pme_exact(xhat, qpsk, alpha, ne);
      double c = c_pme(xhat, qpsk, alpha, ne);
      CVec fact(rd);
      for (int r = 0; r < rd; ++r)
        fact(r) = c * pme_uniform_scalar(xhat(r), qpsk, ne);
      CHECK((exact - fact).norm() <= 1e-9 * (1.0 + exact.norm()));
    }
  }
}

TEST_CASE("mixing coefficient values") {
  std::vector<cplx> qpsk = {cplx(kB, kB), cplx(kB, -kB), cplx(-kB, kB),
                            cplx(-kB, -kB)};
  CVec x = random_cvec(3);
  CHECK(c_pme(x, qpsk, 1.0, 0.4) == doctest::Approx(1.0).epsilon(1e-12));

  CVec z = CVec::Zero(1);
  double want = 0.2 / (0.2 + 0.8 * std::exp(1.0));
  CHECK(c_pme(z, qpsk, 0.2, 1.0) == doctest::Approx(want).epsilon(1e-10));

  // Bounded in (0, 1] over random inputs.
  for (int t = 0; t < 50; ++t) {
    double c = c_pme(random_cvec(4, 2.0), qpsk, 0.1, 0.3);
    CHECK(c > 0.0);
    CHECK(c <= 1.0);
  }
}

TEST_CASE("approximate mixing coefficient") {
  CHECK(c_apme(CVec::Zero(3).eval(), 3.49, 2.46) == 0.0);
  CVec x(1);
  x << cplx(2.46 / 3.49, 0.0);
  CHECK(c_apme(x, 3.49, 2.46) == doctest::Approx(0.0).epsilon(1e-9));
  x << cplx(1e9, 0.0);
  CHECK(c_apme(x, 3.49, 2.46) == 1.0);
}

TEST_CASE("log-domain sums stay finite in extreme regimes") {
  std::vector<cplx> qpsk = {cplx(kB, kB), cplx(kB, -kB), cplx(-kB, kB),
                            cplx(-kB, -kB)};
  CVec big(3);
  big << cplx(1e4, 0), cplx(0, -1e4), cplx(7e3, 7e3);
  CHECK(std::isfinite(c_pme(big, qpsk, 0.2, 1e-8)));
  CHECK(pme_exact(big, qpsk, 0.2, 1e-8).allFinite());
  CHECK(std::isfinite(std::abs(pme_uniform_scalar(big(0), qpsk, 1e-8))));
}
