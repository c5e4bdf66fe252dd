#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "jacd/mathcore.hpp"
#include "jacd/scenario.hpp"
#include "jacd/solvers.hpp"

using namespace jacd;

namespace {

constexpr double kB = 0.7071067811865476;

std::mt19937_64 rng(4242);

CMat random_cmat(int r, int c, double scale = 1.0) {
  std::normal_distribution<double> g;
  CMat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * cplx(g(rng), g(rng));
  return m;
}

// Central finite differences of objective_f over every real coordinate.
void fd_gradient(const CMat& H, const CMat& Xd, const CMat& Y, const CMat& X_P,
                 double lambda, double B, CMat& gH, CMat& gXd) {
  const double h = 1e-6;
  gH.resize(H.rows(), H.cols());
  gXd.resize(Xd.rows(), Xd.cols());
  auto f = [&](const CMat& Hm, const CMat& Xm) {
    return objective_f(Hm, Xm, Y, X_P, lambda, B);
  };
  for (Eigen::Index i = 0; i < H.rows(); ++i)
    for (Eigen::Index j = 0; j < H.cols(); ++j) {
      CMat Hp = H, Hm = H;
      Hp(i, j) += h;
      Hm(i, j) -= h;
      double dre = (f(Hp, Xd) - f(Hm, Xd)) / (2 * h);
      Hp = H;
      Hm = H;
      Hp(i, j) += cplx(0, h);
      Hm(i, j) -= cplx(0, h);
      double dim = (f(Hp, Xd) - f(Hm, Xd)) / (2 * h);
      gH(i, j) = cplx(dre, dim);
    }
  for (Eigen::Index i = 0; i < Xd.rows(); ++i)
    for (Eigen::Index j = 0; j < Xd.cols(); ++j) {
      CMat Xp = Xd, Xm = Xd;
      Xp(i, j) += h;
      Xm(i, j) -= h;
      double dre = (f(H, Xp) - f(H, Xm)) / (2 * h);
      Xp = Xd;
      Xm = Xd;
      Xp(i, j) += cplx(0, h);
      Xm(i, j) -= cplx(0, h);
      double dim = (f(H, Xp) - f(H, Xm)) / (2 * h);
      gXd(i, j) = cplx(dre, dim);
    }
}

struct Toy {
  CMat Y, X_P, H_true, Xd_true;
};

// Identifiable noiseless instance: one active UE, orthogonal pilots.
Toy noiseless_toy() {
  Toy t;
  int MP = 6, N = 3, RP = 3, RD = 4;
  t.X_P = CMat::Zero(N, RP);
  for (int n = 0; n < N; ++n) t.X_P(n, n) = std::sqrt(static_cast<double>(RP));
  t.H_true = CMat::Zero(MP, N);
  t.H_true.col(0) = random_cmat(MP, 1);
  t.Xd_true = CMat::Zero(N, RD);
  auto q = ScenarioConfig::qpsk();
  for (int r = 0; r < RD; ++r) t.Xd_true(0, r) = q[r % 4];
  CMat X(N, RP + RD);
  X << t.X_P, t.Xd_true;
  t.Y = t.H_true * X;
  return t;
}

}  // namespace

TEST_CASE("gradients vanish at noiseless consistent points") {
  Toy t = noiseless_toy();
  CMat gH, gXd;
  gradient_f(t.H_true, t.Xd_true, t.Y, t.X_P, 0.0, kB, gH, gXd);
  CHECK(gH.norm() < 1e-12);
  CHECK(gXd.norm() < 1e-12);
}

TEST_CASE("gradient matches finite differences") {
  for (int trial = 0; trial < 5; ++trial) {
    int MP = 4, N = 3, RP = 2, RD = 3;
    CMat H = random_cmat(MP, N), Xd = random_cmat(N, RD, 0.5);
    CMat Y = random_cmat(MP, RP + RD), X_P = random_cmat(N, RP);
    double lambda = trial % 2 ? 0.3 : 0.0;
    CMat gH, gXd, fH, fXd;
    gradient_f(H, Xd, Y, X_P, lambda, kB, gH, gXd);
    fd_gradient(H, Xd, Y, X_P, lambda, kB, fH, fXd);
    CHECK((gH - fH).norm() / (1.0 + fH.norm()) < 1e-5);
    CHECK((gXd - fXd).norm() / (1.0 + fXd.norm()) < 1e-5);
  }
}

TEST_CASE("forward step basics") {
  Toy t = noiseless_toy();
  CMat H = random_cmat(6, 3), Xd = random_cmat(3, 4, 0.3);
  CMat H0 = H, Xd0 = Xd;
  fbs_forward(H, Xd, t.Y, t.X_P, 0.0, 0.0, kB);
  CHECK((H - H0).norm() == 0.0);
  CHECK((Xd - Xd0).norm() == 0.0);

  // Zero gradient leaves the state alone even with tau > 0.
  CMat Hc = t.H_true, Xc = t.Xd_true;
  fbs_forward(Hc, Xc, t.Y, t.X_P, 0.1, 0.0, kB);
  CHECK((Hc - t.H_true).norm() < 1e-12);

  // A small step decreases the smooth objective.
  double before = objective_f(H0, Xd0, t.Y, t.X_P, 0.0, kB);
  CMat H1 = H0, X1 = Xd0;
  double L = lipschitz_estimate(H0, Xd0, t.Y, t.X_P);
  fbs_forward(H1, X1, t.Y, t.X_P, 0.9 / L, 0.0, kB);
  CHECK(objective_f(H1, X1, t.Y, t.X_P, 0.0, kB) < before);
}

TEST_CASE("channel backward step: block shrinkage against a scale-search oracle") {
  int M = 2;
  CMat hhat = random_cmat(6, 4);
  CHECK((backward_H(hhat, 0.0, M) - hhat).norm() == 0.0);

  CMat tiny = random_cmat(6, 4, 1e-3);
  CHECK(backward_H(tiny, 1.0, M).norm() == 0.0);

  double kappa = 0.8;
  CMat out = backward_H(hhat, kappa, M);
  for (int n = 0; n < 4; ++n)
    for (int p = 0; p < 3; ++p) {
      CVec blk = hhat.col(n).segment(p * M, M);
      CVec got = out.col(n).segment(p * M, M);
      // Dense search over the scale of blk: the separable objective
      // 0.5*||t*blk - blk||^2 + kappa*||t*blk|| is minimized by shrinkage.
      double best_t = 0.0, best_obj = kappa * 0.0 + 0.5 * blk.squaredNorm();
      for (double tt = 0.0; tt <= 1.2; tt += 1e-5) {
        double obj = 0.5 * (1 - tt) * (1 - tt) * blk.squaredNorm() +
                     kappa * tt * blk.norm();
        if (obj < best_obj) {
          best_obj = obj;
          best_t = tt;
        }
      }
      CHECK((got - best_t * blk).norm() < 1e-4 * (1.0 + blk.norm()));
    }
}

TEST_CASE("data backward steps") {
  CMat xhat = random_cmat(3, 4);
  CHECK(backward_Xd_box(CMat::Zero(3, 4).eval(), 0.5, kB).norm() == 0.0);

  CMat clamped = backward_Xd_box(xhat, 0.0, kB);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) {
      CHECK(clamped(i, j).real() ==
            doctest::Approx(std::clamp(xhat(i, j).real(), -kB, kB)));
      CHECK(clamped(i, j).imag() ==
            doctest::Approx(std::clamp(xhat(i, j).imag(), -kB, kB)));
    }

  CMat boxed = backward_Xd_box(xhat, 0.3, kB);
  for (int i = 0; i < 3; ++i) {
    CVec row = xhat.row(i).transpose();
    CHECK((boxed.row(i).transpose() - prox_box_group(row, 0.3, kB)).norm() <
          1e-12);
  }
}

TEST_CASE("PME backward step limits and factorized equivalence") {
  auto q = ScenarioConfig::qpsk();
  Toy t = noiseless_toy();
  CMat rec = backward_Xd_pme(t.Xd_true, q, 0.5, 1e-5);
  CHECK((rec.row(0) - t.Xd_true.row(0)).norm() < 1e-9);

  // Weak observations cannot overcome a vanishing activity prior.
  CMat small = random_cmat(3, 4, 0.05);
  CMat near_zero = backward_Xd_pme(small, q, 1e-12, 0.3);
  CHECK(near_zero.norm() < 1e-6);

  CMat xhat = random_cmat(3, 4);
  CMat exact = backward_Xd_pme(xhat, q, 0.2, 0.4);
  CMat fact = backward_Xd_pme_factorized(xhat, q, 0.2, 0.4);
  CHECK((exact - fact).norm() <= 1e-9 * (1.0 + exact.norm()));
}

TEST_CASE("box-constrained FBS recovers an identifiable instance") {
  Toy t = noiseless_toy();
  SolverParams sp;
  sp.mu_h = 1e-6;
  sp.mu_x = 1e-6;
  sp.lambda = 0.0;
  sp.K = 400;
  sp.tol = 1e-10;
  sp.M = 2;
  sp.B = kB;
  FbsState init;
  init.H = CMat::Zero(6, 3);
  init.Xd = CMat::Zero(3, 4);
  FbsState out = run_box_fbs(t.Y, t.X_P, sp, init);
  CHECK((out.H - t.H_true).norm() / t.H_true.norm() < 1e-3);
  CHECK((out.Xd - t.Xd_true).norm() / t.Xd_true.norm() < 1e-3);
}

TEST_CASE("objective trace is non-increasing at the Lipschitz step") {
  for (int trial = 0; trial < 10; ++trial) {
    int MP = 4, N = 5, RP = 3, RD = 3;
    CMat Y = random_cmat(MP, RP + RD), X_P = random_cmat(N, RP);
    SolverParams sp;
    sp.mu_h = 0.2;
    sp.mu_x = 0.1;
    sp.lambda = 0.0;
    sp.K = 60;
    sp.tol = 0.0;
    sp.M = 2;
    sp.B = kB;
    FbsState init;
    init.H = random_cmat(MP, N, 0.3);
    init.Xd = random_cmat(N, RD, 0.2);
    FbsState out = run_box_fbs(Y, X_P, sp, init);
    for (size_t k = 1; k < out.objective_trace.size(); ++k)
      CHECK(out.objective_trace[k] <= out.objective_trace[k - 1] + 1e-9);
    // Box feasibility after every iteration (final state inspected here).
    CHECK(out.Xd.real().cwiseAbs().maxCoeff() <= kB + 1e-12);
    CHECK(out.Xd.imag().cwiseAbs().maxCoeff() <= kB + 1e-12);
  }
}

TEST_CASE("K=0 returns the initial state") {
  Toy t = noiseless_toy();
  SolverParams sp;
  sp.K = 0;
  sp.M = 2;
  sp.B = kB;
  FbsState init;
  init.H = random_cmat(6, 3);
  init.Xd = backward_Xd_box(random_cmat(3, 4), 0.0, kB);
  FbsState out = run_box_fbs(t.Y, t.X_P, sp, init);
  CHECK((out.H - init.H).norm() == 0.0);
  CHECK((out.Xd - init.Xd).norm() == 0.0);
  FbsState out2 =
      run_pme_jacd(t.Y, t.X_P, sp, ScenarioConfig::qpsk(), 0.2, {}, init);
  CHECK((out2.H - init.H).norm() == 0.0);
}

TEST_CASE("PME-based JACD on the identifiable instance") {
  Toy t = noiseless_toy();
  auto q = ScenarioConfig::qpsk();
  SolverParams sp;
  sp.mu_h = 1e-6;
  sp.K = 400;
  sp.tol = 1e-10;
  sp.M = 2;
  sp.B = kB;
  FbsState init;
  init.H = CMat::Zero(6, 3);
  init.Xd = CMat::Zero(3, 4);
  FbsState out = run_pme_jacd(t.Y, t.X_P, sp, q, 0.999, {1e-3}, init);
  CHECK((out.Xd.row(0) - t.Xd_true.row(0)).norm() / t.Xd_true.row(0).norm() <
        1e-2);

  // Huge Ne pins the data estimate near the constellation mean (zero).
  FbsState pinned = run_pme_jacd(t.Y, t.X_P, sp, q, 0.5, {1e12}, init);
  CHECK(pinned.Xd.norm() < 1e-6);
}

TEST_CASE("P2 objective closed forms and independent re-implementation") {
  Toy t = noiseless_toy();
  SolverParams sp;
  sp.mu_h = 0.4;
  sp.mu_x = 0.3;
  sp.lambda = 0.7;
  sp.M = 2;
  sp.B = kB;

  FbsState zero;
  zero.H = CMat::Zero(6, 3);
  zero.Xd = CMat::Zero(3, 4);
  double c0 = -3.0 * 4.0 * std::pow(kB, 4.0);
  CHECK(objective_p2(zero, t.Y, t.X_P, sp) ==
        doctest::Approx(0.5 * t.Y.squaredNorm() + sp.lambda * c0));

  SolverParams free_sp = sp;
  free_sp.mu_h = free_sp.mu_x = free_sp.lambda = 0.0;
  FbsState truth;
  truth.H = t.H_true;
  truth.Xd = t.Xd_true;
  CHECK(objective_p2(truth, t.Y, t.X_P, free_sp) == doctest::Approx(0.0));

  // Term-by-term re-derivation.
  FbsState st;
  st.H = random_cmat(6, 3);
  st.Xd = backward_Xd_box(random_cmat(3, 4), 0.0, kB);
  CMat X(3, 7);
  X << t.X_P, st.Xd;
  double fid = 0.5 * (t.Y - st.H * X).squaredNorm();
  double gh = 0.0;
  for (int n = 0; n < 3; ++n)
    for (int p = 0; p < 3; ++p) gh += st.H.col(n).segment(p * 2, 2).norm();
  double gx = 0.0;
  for (int n = 0; n < 3; ++n) gx += st.Xd.row(n).norm();
  double creg = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j)
      creg -= std::pow(std::norm(st.Xd(i, j)) - kB * kB, 2.0);
  double want = fid + sp.mu_h * gh + sp.mu_x * gx + sp.lambda * creg;
  CHECK(objective_p2(st, t.Y, t.X_P, sp) == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("unboxed run matches a huge box") {
  int MP = 4, N = 4, RP = 3, RD = 3;
  CMat Y = random_cmat(MP, RP + RD), X_P = random_cmat(N, RP);
  SolverParams sp;
  sp.mu_h = 0.3;
  sp.mu_x = 0.2;
  sp.K = 30;
  sp.tol = 0.0;
  sp.M = 2;
  sp.B = kB;
  FbsState init;
  init.H = random_cmat(MP, N, 0.2);
  init.Xd = random_cmat(N, RD, 0.1);
  FbsState unboxed = run_unboxed_fbs(Y, X_P, sp, init);
  SolverParams big = sp;
  big.B = 1e9;
  FbsState boxed = run_box_fbs(Y, X_P, big, init);
  CHECK((unboxed.H - boxed.H).norm() < 1e-8 * (1.0 + boxed.H.norm()));
  CHECK((unboxed.Xd - boxed.Xd).norm() < 1e-8 * (1.0 + boxed.Xd.norm()));
}

TEST_CASE("shrinkage produces exact zero channel columns") {
  int MP = 6, N = 5, RP = 4, RD = 3;
  CMat Y = random_cmat(MP, RP + RD, 0.1);
  CMat X_P = random_cmat(N, RP);
  SolverParams sp;
  sp.mu_h = 5.0;  // aggressive: most blocks die
  sp.mu_x = 0.1;
  sp.K = 20;
  sp.tol = 0.0;
  sp.M = 3;
  sp.B = kB;
  FbsState init;
  init.H = random_cmat(MP, N, 0.05);
  init.Xd = random_cmat(N, RD, 0.05);
  FbsState out = run_box_fbs(Y, X_P, sp, init);
  int exact_zero = 0;
  for (int n = 0; n < N; ++n)
    if (out.H.col(n).norm() == 0.0) ++exact_zero;
  CHECK(exact_zero > 0);  // bit-zero sparsity, not merely small
}

TEST_CASE("divergence is reported") {
  Toy t = noiseless_toy();
  SolverParams sp;
  sp.K = 200;
  sp.tau = 1e6;  // absurd step forces blow-up
  sp.tol = 0.0;
  sp.M = 2;
  sp.B = 1e30;
  FbsState init;
  init.H = random_cmat(6, 3);
  init.Xd = random_cmat(3, 4);
  CHECK_THROWS(run_unboxed_fbs(t.Y, t.X_P, sp, init));
}
