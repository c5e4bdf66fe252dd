#pragma once

// Experiment configuration, seeded Monte-Carlo execution, threshold
// calibration, parallel trial dispatch and CSV serialization.

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "jacd/baselines.hpp"
#include "jacd/detection.hpp"
#include "jacd/dunfold.hpp"
#include "jacd/scenario.hpp"
#include "jacd/solvers.hpp"

namespace jacd {

// User-facing configuration problems (bad file, bad key, bad receiver name).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentSpec {
  ScenarioConfig scenario;
  std::vector<std::string> receivers = {"b1"};
  int trials = 1;
  std::uint64_t seed = 1;
  std::string sweep = "none";  // none | P | alpha
  std::vector<double> sweep_values;
  std::vector<double> roc_thresholds;  // empty selects an automatic grid
  int calibration_trials = 200;
  int threads = 1;
  // The under-relaxed default keeps the pme receiver from hard-locking on
  // near-far scenarios; the other FBS receivers ignore the field.
  SolverParams solver = {.pme_damping = 0.01};
  BaselineConfig baseline;
  std::string du_abc_params;
  std::string du_poem_params;
  TrainConfig train;
  std::string train_variant = "abc";

  void validate() const;  // throws ConfigError
};

// Flat key=value text with [section] headers; unknown keys are errors.
ExperimentSpec parse_config(const std::string& path);
ExperimentSpec parse_config_text(const std::string& text);

struct ResultRow {
  std::string sweep_label;
  std::string receiver;
  int trials = 0;
  double uder = 0.0, uder_se = 0.0;
  double nmse = 0.0, nmse_se = 0.0;
  double aser = 0.0, aser_se = 0.0;
  double wall_s = 0.0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<std::string> metadata;  // calibrated thresholds etc.
  int aborted_trials = 0;
  std::vector<std::string> log;
};

struct ReceiverResult {
  CMat h_est;
  DetectionResult det;
};

using Receiver = std::function<ReceiverResult(const TrialScenario&,
                                              const ScenarioConfig&)>;

// Core Monte-Carlo loop with caller-provided receivers (used by tests with
// stub receivers); thresholds must already be baked into each Receiver.
ExperimentResult run_experiment_with(
    const ExperimentSpec& spec,
    const std::vector<std::pair<std::string, Receiver>>& receivers);

// Full pipeline: per sweep value, calibrate decision thresholds on a
// separate-seed calibration set, then run the configured receivers.
ExperimentResult run_experiment(const ExperimentSpec& spec);

struct RocRow {
  std::string sweep_label;
  std::string receiver;
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

std::vector<RocRow> run_roc(const ExperimentSpec& spec);

std::string results_csv(const std::vector<ResultRow>& rows);
std::string roc_csv(const std::vector<RocRow>& rows);
// One scenario realization as CSV (AP/UE positions and activity).
std::string scenario_csv(const ScenarioConfig& cfg, std::uint64_t seed);

// Shortest round-trip decimal representation.
std::string format_double(double x);

// Order-insensitive mean/stderr helpers (pairwise summation).
double pairwise_sum(const std::vector<double>& v);
void mean_stderr(const std::vector<double>& v, double& mean, double& se);

}  // namespace jacd
