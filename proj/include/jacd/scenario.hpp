#pragma once

// Random cell-free mMTC scenario generation: geometry, three-slope path
// loss with shadow fading, activity, pilots, payload and received signal.

#include <cstdint>
#include <vector>

#include "jacd/types.hpp"

namespace jacd {

struct ScenarioConfig {
  int P = 10;            // access points
  int M = 4;             // antennas per AP
  int N = 50;            // user equipments
  double alpha = 0.2;    // activity probability
  int R_P = 20;          // pilot length
  int R_D = 40;          // data length
  double area_side = 500.0;          // m
  double h_AP = 15.0;                // m
  double h_UE = 1.65;                // m
  double sigma_sh_db = 2.8284271247461903;  // shadow std in dB (variance 8)
  double fc_mhz = 1900.0;
  double bandwidth_hz = 20e6;
  double noise_figure_db = 9.0;
  double noise_temp_k = 290.0;
  double tx_power_w = 0.1;
  double power_ctrl_range_db = 12.0;
  double D0_km = 0.01;
  double D1_km = 0.05;
  double B = 0.7071067811865476;     // box half-width, sqrt(0.5) for QPSK
  std::vector<cplx> constellation = qpsk();

  static std::vector<cplx> qpsk();
  void validate() const;  // throws std::invalid_argument on violation

  // Physical noise power k_B * T * BW * 10^(NF/10), watts.
  double noise_power_w() const;
};

struct Geometry {
  RMat ap_pos;  // P x 2, meters
  RMat ue_pos;  // N x 2, meters
  RMat d_km;    // N x P, 3-D distance in km
};

struct ChannelRealization {
  Geometry geom;
  RMat beta;              // N x P large-scale gains after noise normalization
  RMat z_db;              // N x P shadow draws, dB
  RVec g;                 // N power-control scales
  std::vector<int> xi;    // activity indicators
  CMat H;                 // MP x N, column n is xi_n * h_n
  int active_count() const;
};

struct TxSignals {
  CMat X_P;        // N x R_P
  CMat X_D_true;   // N x R_D, inactive rows zero
};

struct RxObservation {
  CMat Y;   // MP x R
  int R_P = 0;
  double N0 = 1.0;
  CMat pilot_part() const { return Y.leftCols(R_P); }
  CMat data_part() const { return Y.rightCols(Y.cols() - R_P); }
};

Geometry sample_geometry(const ScenarioConfig& cfg, std::uint64_t seed);

// Three-slope path loss (linear), shadow term only in the far branch.
double large_scale_gain(double d_km, double z_db, const ScenarioConfig& cfg);

ChannelRealization sample_channel(const ScenarioConfig& cfg, const Geometry& geom,
                                  std::uint64_t seed);

// Low-coherence pilots from alternating projections toward an equiangular
// tight frame; falls back to normalized Gaussian rows on non-convergence.
CMat generate_pilots(const ScenarioConfig& cfg, std::uint64_t seed);

TxSignals sample_tx(const ScenarioConfig& cfg, const ChannelRealization& ch,
                    const CMat& pilots, std::uint64_t seed);

RxObservation synthesize_rx(const ChannelRealization& ch, const TxSignals& tx,
                            std::uint64_t seed, bool noiseless = false);

// Everything one trial needs, generated from (cfg, seed) deterministically.
struct TrialScenario {
  ChannelRealization channel;
  TxSignals tx;
  RxObservation rx;
};

TrialScenario make_trial(const ScenarioConfig& cfg, const CMat& pilots,
                         std::uint64_t seed);

// SplitMix64 step; used to derive independent per-purpose seeds.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace jacd
