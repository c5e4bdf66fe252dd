#include "jacd/scenario.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace jacd {

namespace {
constexpr double kBoltzmann = 1.380649e-23;
}

std::vector<cplx> ScenarioConfig::qpsk() {
  const double b = 0.7071067811865476;
  return {{b, b}, {b, -b}, {-b, b}, {-b, -b}};
}

double ScenarioConfig::noise_power_w() const {
  return kBoltzmann * noise_temp_k * bandwidth_hz *
         std::pow(10.0, noise_figure_db / 10.0);
}

void ScenarioConfig::validate() const {
  if (P < 1 || M < 1 || N < 1 || R_P < 1 || R_D < 1)
    throw std::invalid_argument("config: dimensions must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("config: alpha must be in (0,1)");
  if (!(D0_km < D1_km)) throw std::invalid_argument("config: D0 >= D1");
  if (!(B > 0.0)) throw std::invalid_argument("config: B <= 0");
  if (constellation.empty()) throw std::invalid_argument("config: empty constellation");
  for (cplx q : constellation)
    if (std::abs(q.real()) > B + 1e-12 || std::abs(q.imag()) > B + 1e-12)
      throw std::invalid_argument("config: constellation outside box");
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + stream * 0x9E3779B97F4A7C15ull + 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Geometry sample_geometry(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(mix_seed(seed, 1));
  std::uniform_real_distribution<double> uni(0.0, cfg.area_side);
  Geometry g;
  g.ap_pos.resize(cfg.P, 2);
  g.ue_pos.resize(cfg.N, 2);
  for (int p = 0; p < cfg.P; ++p) {
    g.ap_pos(p, 0) = uni(rng);
    g.ap_pos(p, 1) = uni(rng);
  }
  for (int n = 0; n < cfg.N; ++n) {
    g.ue_pos(n, 0) = uni(rng);
    g.ue_pos(n, 1) = uni(rng);
  }
  const double dh = cfg.h_AP - cfg.h_UE;
  g.d_km.resize(cfg.N, cfg.P);
  for (int n = 0; n < cfg.N; ++n)
    for (int p = 0; p < cfg.P; ++p) {
      double dx = g.ue_pos(n, 0) - g.ap_pos(p, 0);
      double dy = g.ue_pos(n, 1) - g.ap_pos(p, 1);
      g.d_km(n, p) = std::sqrt(dx * dx + dy * dy + dh * dh) / 1000.0;
    }
  return g;
}

double large_scale_gain(double d_km, double z_db, const ScenarioConfig& cfg) {
  if (!(d_km > 0.0)) throw std::invalid_argument("large_scale_gain: d <= 0");
  const double L = 45.5 + 35.46 * std::log10(cfg.fc_mhz) -
                   13.82 * std::log10(cfg.h_AP) -
                   (1.1 * std::log10(cfg.fc_mhz) - 0.7) * cfg.h_UE;
  if (d_km > cfg.D1_km)
    return std::pow(10.0, (-L + z_db) / 10.0) * std::pow(d_km, -3.5);
  if (d_km > cfg.D0_km)
    return std::pow(10.0, -L / 10.0) * std::pow(cfg.D1_km, -1.5) *
           std::pow(d_km, -2.0);
  return std::pow(10.0, -L / 10.0) * std::pow(cfg.D1_km, -1.5) *
         std::pow(cfg.D0_km, -2.0);
}

ChannelRealization sample_channel(const ScenarioConfig& cfg, const Geometry& geom,
                                  std::uint64_t seed) {
  ChannelRealization ch;
  ch.geom = geom;
  std::mt19937_64 rng(mix_seed(seed, 2));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  // Physical gains, then fold the transmit-power/noise normalization into
  // beta so the received noise has unit variance.
  const double norm_scale = cfg.tx_power_w / cfg.noise_power_w();
  ch.z_db.resize(cfg.N, cfg.P);
  ch.beta.resize(cfg.N, cfg.P);
  for (int n = 0; n < cfg.N; ++n)
    for (int p = 0; p < cfg.P; ++p) {
      ch.z_db(n, p) = cfg.sigma_sh_db * gauss(rng);
      ch.beta(n, p) =
          large_scale_gain(geom.d_km(n, p), ch.z_db(n, p), cfg) * norm_scale;
    }

  // Power control: cap every UE's aggregate gain at range_db above the
  // weakest UE, bounding the post-control spread.
  RVec gamma = ch.beta.rowwise().sum();
  double gamma_ref =
      gamma.minCoeff() * std::pow(10.0, cfg.power_ctrl_range_db / 10.0);
  ch.g.resize(cfg.N);
  for (int n = 0; n < cfg.N; ++n)
    ch.g(n) = std::min(1.0, gamma_ref / gamma(n));

  ch.xi.resize(cfg.N);
  for (int n = 0; n < cfg.N; ++n) ch.xi[n] = uni(rng) < cfg.alpha ? 1 : 0;

  const double inv_sqrt2 = std::sqrt(0.5);
  ch.H = CMat::Zero(cfg.M * cfg.P, cfg.N);
  for (int n = 0; n < cfg.N; ++n)
    for (int p = 0; p < cfg.P; ++p) {
      double s = std::sqrt(ch.g(n) * ch.beta(n, p));
      for (int m = 0; m < cfg.M; ++m) {
        cplx w(gauss(rng) * inv_sqrt2, gauss(rng) * inv_sqrt2);
        if (ch.xi[n]) ch.H(p * cfg.M + m, n) = s * w;
        // Inactive UEs draw the same variates so activity does not shift
        // the stream consumed by later UEs.
      }
    }
  return ch;
}

int ChannelRealization::active_count() const {
  return std::accumulate(xi.begin(), xi.end(), 0);
}

namespace {

// One alternating-projection pass count for the ETF approximation.
constexpr int kEtfIterations = 500;

CMat gaussian_frame(int rp, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  CMat f(rp, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < rp; ++i) f(i, j) = cplx(gauss(rng), gauss(rng));
  for (int j = 0; j < n; ++j) f.col(j).normalize();
  return f;
}

double max_coherence(const CMat& f) {
  CMat g = f.adjoint() * f;
  double mu = 0.0;
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      if (i != j) mu = std::max(mu, std::abs(g(i, j)));
  return mu;
}

}  // namespace

CMat generate_pilots(const ScenarioConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 3));
  const int rp = cfg.R_P, n = cfg.N;
  CMat f = gaussian_frame(rp, n, rng);
  const double welch =
      n > rp ? std::sqrt(static_cast<double>(n - rp) / (rp * (n - 1.0))) : 0.0;

  CMat best = f;
  double best_mu = max_coherence(f);
  for (int it = 0; it < kEtfIterations; ++it) {
    CMat g = f.adjoint() * f;
    // Nearest Gram matrix with unit diagonal and off-diagonal magnitudes
    // clipped to the Welch bound.
    for (Eigen::Index i = 0; i < n; ++i) {
      g(i, i) = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        double m = std::abs(g(i, j));
        if (m > welch) g(i, j) *= (welch / m) * (m > 0 ? 1.0 : 0.0);
      }
    }
    // Project back to rank R_P.
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (g + g.adjoint()));
    CMat v = es.eigenvectors().rightCols(rp);
    RVec ev = es.eigenvalues().tail(rp).cwiseMax(0.0).cwiseSqrt();
    f = (ev.asDiagonal() * CMat(v.adjoint()));
    for (int j = 0; j < n; ++j) {
      double nn = f.col(j).norm();
      if (nn > 0)
        f.col(j) /= nn;
      else
        f.col(j) = gaussian_frame(rp, 1, rng);
    }
    double mu = max_coherence(f);
    if (mu < best_mu) {
      best_mu = mu;
      best = f;
    }
  }
  if (!best.allFinite()) best = gaussian_frame(rp, n, rng);  // fallback

  // Row n of X_P is the n-th frame vector scaled to energy R_P.
  CMat xp(n, rp);
  double s = std::sqrt(static_cast<double>(rp));
  for (int j = 0; j < n; ++j) xp.row(j) = s * best.col(j).transpose();
  return xp;
}

TxSignals sample_tx(const ScenarioConfig& cfg, const ChannelRealization& ch,
                    const CMat& pilots, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 4));
  std::uniform_int_distribution<int> pick(
      0, static_cast<int>(cfg.constellation.size()) - 1);
  TxSignals tx;
  tx.X_P = pilots;
  tx.X_D_true = CMat::Zero(cfg.N, cfg.R_D);
  for (int n = 0; n < cfg.N; ++n)
    for (int r = 0; r < cfg.R_D; ++r) {
      cplx sym = cfg.constellation[pick(rng)];
      if (ch.xi[n]) tx.X_D_true(n, r) = sym;
    }
  return tx;
}

RxObservation synthesize_rx(const ChannelRealization& ch, const TxSignals& tx,
                            std::uint64_t seed, bool noiseless) {
  if (ch.H.cols() != tx.X_P.rows() || tx.X_P.rows() != tx.X_D_true.rows())
    throw std::invalid_argument("synthesize_rx: dimension mismatch");
  std::mt19937_64 rng(mix_seed(seed, 5));
  std::normal_distribution<double> gauss(0.0, 1.0);
  RxObservation rx;
  rx.R_P = static_cast<int>(tx.X_P.cols());
  const Eigen::Index mp = ch.H.rows();
  const Eigen::Index r = tx.X_P.cols() + tx.X_D_true.cols();
  rx.Y.resize(mp, r);
  rx.Y.leftCols(tx.X_P.cols()) = ch.H * tx.X_P;
  rx.Y.rightCols(tx.X_D_true.cols()) = ch.H * tx.X_D_true;
  if (!noiseless) {
    const double inv_sqrt2 = std::sqrt(0.5);
    for (Eigen::Index j = 0; j < r; ++j)
      for (Eigen::Index i = 0; i < mp; ++i)
        rx.Y(i, j) += cplx(gauss(rng) * inv_sqrt2, gauss(rng) * inv_sqrt2);
  }
  return rx;
}

TrialScenario make_trial(const ScenarioConfig& cfg, const CMat& pilots,
                         std::uint64_t seed) {
  TrialScenario t;
  Geometry geom = sample_geometry(cfg, seed);
  t.channel = sample_channel(cfg, geom, seed);
  t.tx = sample_tx(cfg, t.channel, pilots, seed);
  t.rx = synthesize_rx(t.channel, t.tx, seed);
  return t;
}

}  // namespace jacd
