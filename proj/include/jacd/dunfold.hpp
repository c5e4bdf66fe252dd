#pragma once

// Deep-unfolded solvers DU-ABC and DU-POEM: momentum forward steps,
// approximate backward steps, soft AUD head, loss, analytic parameter
// gradients and the trainer.

#include <cstdint>
#include <string>
#include <vector>

#include "jacd/detection.hpp"
#include "jacd/scenario.hpp"
#include "jacd/types.hpp"

namespace jacd {

enum class DuVariant { Abc, Poem };

struct LayerParams {
  double tau_h = 0.0;
  double eta_h = 0.0;
  double tau_x = 0.0;
  double eta_x = 0.0;
  double lambda = 0.0;   // ABC forward only
  double mu_h_t = 0.0;   // shrinkage weight for H blocks
  double mu_x_t = 0.0;   // ABC backward
  double omega = 1.0;    // ABC backward scale
  CVec bias;             // ABC backward bias, length R_D, shared across rows
  double ne = 1.0;       // POEM backward
  double rho = 3.49;
  double nu = 2.46;
};

struct UnfoldedParams {
  DuVariant variant = DuVariant::Abc;
  std::vector<LayerParams> layers;
  AudParams aud;
  int R_D = 0;
};

struct MomentumState {
  CMat D_h;
  CMat D_x;
};

struct DuOutput {
  CMat H;
  CMat Xd;
  RVec scores;
};

// One momentum forward step; the lambda regularizer term is included for
// the ABC variant only.
void du_forward(const CMat& H, const CMat& Xd, MomentumState& mom,
                const LayerParams& lp, const CMat& Y, const CMat& X_P, double B,
                DuVariant variant, CMat& h_hat, CMat& xd_hat);

// Backward steps. Both use the smoothed-norm shrinkage so training-time and
// evaluation-time outputs coincide.
void du_abc_backward(const CMat& h_hat, const CMat& xd_hat, const LayerParams& lp,
                     double B, int M, CMat& h_out, CMat& xd_out);
void du_poem_backward(const CMat& h_hat, const CMat& xd_hat, const LayerParams& lp,
                      const std::vector<cplx>& constellation, int M, CMat& h_out,
                      CMat& xd_out);

DuOutput run_du(const CMat& Y, const CMat& X_P, const UnfoldedParams& params,
                const std::vector<cplx>& constellation, double B, int M,
                const CMat& h_init, const CMat& xd_init);

// Loss = ||diag(L) Xd_final - Xd_true||_F^2.
double du_loss(const RVec& scores, const CMat& xd_final, const CMat& xd_true);

// Flat parameter vector layout (per layer, then the AUD head):
//   ABC:  tau_h eta_h tau_x eta_x lambda mu_h_t mu_x_t omega Re(b) Im(b)...
//   POEM: tau_h eta_h tau_x eta_x mu_h_t ne rho nu
//   AUD:  omega_h omega_x T_th
RVec flatten_params(const UnfoldedParams& p);
UnfoldedParams unflatten_params(const RVec& v, const UnfoldedParams& shape);
// Feasibility projection: mu_h_t, mu_x_t >= 0; ne >= 1e-8.
void project_params(UnfoldedParams& p);

struct DuSample {
  CMat Y;
  CMat X_P;
  CMat Xd_true;
  CMat h_init;
  CMat xd_init;
};

// Loss and analytic gradient (reverse pass) for one sample.
double du_loss_and_grad(const DuSample& s, const UnfoldedParams& params,
                        const std::vector<cplx>& constellation, double B, int M,
                        RVec* grad);

// Mean loss gradient over a batch.
RVec grad_params(const std::vector<DuSample>& batch, const UnfoldedParams& params,
                 const std::vector<cplx>& constellation, double B, int M,
                 double* mean_loss = nullptr);

struct TrainConfig {
  int epochs = 100;
  int scenarios_per_epoch = 200;
  int batch = 8;
  double lr = 1e-3;
  double val_fraction = 0.2;
  std::uint64_t seed = 1;
  int K = 10;
  // Solver constants used for the Baseline-1 initialization of each sample.
  double init_mu_h = 0.0;
  int init_iters = 50;
  bool verbose = false;
};

struct TrainResult {
  UnfoldedParams params;
  double initial_val_loss = 0.0;
  double best_val_loss = 0.0;
  bool aborted = false;  // divergence; params hold the last good checkpoint
};

// Parameter initialization at a working classical configuration, probed on
// a few sample scenarios.
UnfoldedParams init_unfolded_params(const ScenarioConfig& cfg, DuVariant variant,
                                    int K, double mu_h, double mu_x,
                                    std::uint64_t seed);

// Baseline-1 style initial iterate used by the solvers and DU networks.
void baseline1_init(const CMat& Y, const CMat& X_P, int R_P, double mu_h,
                    int K_iter, double tol, int M, double B, CMat& h_init,
                    CMat& xd_init);

TrainResult train(const ScenarioConfig& cfg, const TrainConfig& tc,
                  UnfoldedParams params0);

// Versioned text round-trip of trained parameters.
std::string serialize_params(const UnfoldedParams& p);
UnfoldedParams deserialize_params(const std::string& text);
void save_params(const UnfoldedParams& p, const std::string& path);
UnfoldedParams load_params(const std::string& path);

}  // namespace jacd
