#include "jacd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

namespace jacd {

std::string format_double(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

double pairwise_sum(const std::vector<double>& v) {
  std::function<double(size_t, size_t)> rec = [&](size_t lo, size_t hi) -> double {
    if (hi - lo <= 8) {
      double s = 0.0;
      for (size_t i = lo; i < hi; ++i) s += v[i];
      return s;
    }
    size_t mid = lo + (hi - lo) / 2;
    return rec(lo, mid) + rec(mid, hi);
  };
  return v.empty() ? 0.0 : rec(0, v.size());
}

void mean_stderr(const std::vector<double>& v, double& mean, double& se) {
  const size_t n = v.size();
  if (n == 0) {
    mean = se = 0.0;
    return;
  }
  mean = pairwise_sum(v) / static_cast<double>(n);
  if (n == 1) {
    se = 0.0;
    return;
  }
  std::vector<double> sq(n);
  for (size_t i = 0; i < n; ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
  const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
  se = std::sqrt(var / static_cast<double>(n));
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double to_d(const std::string& s, const std::string& key) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for " + key + ": '" + s + "'");
  }
}

int to_i(const std::string& s, const std::string& key) {
  double v = to_d(s, key);
  if (v != std::floor(v)) throw ConfigError("config: " + key + " must be integer");
  return static_cast<int>(v);
}

std::vector<double> to_dlist(const std::string& s, const std::string& key) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  for (const std::string& tok : split(s, ','))
    out.push_back(to_d(trim(tok), key));
  return out;
}

const std::vector<std::string> kKnownReceivers = {
    "b1", "b3", "b5", "boxfbs", "pme", "du-abc", "du-poem"};

// Amount each receiver needs from the shared scoring stage.
struct ScoredOutput {
  CMat h_est;
  CMat xd_est;     // empty for b1/b3 (data detection happens post-threshold)
  RVec scores;
};

struct StagedReceiver {
  std::function<ScoredOutput(const TrialScenario&)> score;
  std::function<DetectionResult(const TrialScenario&, const ScoredOutput&,
                                double thr)> decide;
  bool soft = false;  // soft scores use strict >, energies use >=
};

std::vector<int> threshold_scores(const RVec& scores, double thr, bool soft) {
  std::vector<int> xi(scores.size());
  for (Eigen::Index n = 0; n < scores.size(); ++n)
    xi[n] = (soft ? scores(n) > thr : scores(n) >= thr) ? 1 : 0;
  return xi;
}

CMat mask_columns(const CMat& h, const std::vector<int>& xi) {
  CMat out = h;
  for (Eigen::Index n = 0; n < out.cols(); ++n)
    if (!xi[static_cast<size_t>(n)]) out.col(n).setZero();
  return out;
}

SolverParams solver_for(const ExperimentSpec& spec, const ScenarioConfig& cfg) {
  SolverParams sp = spec.solver;
  sp.M = cfg.M;
  sp.B = cfg.B;
  return sp;
}

FbsState init_state(const TrialScenario& tr, const ExperimentSpec& spec,
                    const ScenarioConfig& cfg) {
  FbsState st;
  baseline1_init(tr.rx.Y, tr.tx.X_P, cfg.R_P, spec.baseline.mu_h,
                 spec.baseline.K_iter, spec.baseline.tol, cfg.M, cfg.B, st.H,
                 st.Xd);
  return st;
}

StagedReceiver make_staged(const std::string& name, const ExperimentSpec& spec,
                           const ScenarioConfig& cfg,
                           const UnfoldedParams* du_abc,
                           const UnfoldedParams* du_poem) {
  StagedReceiver r;
  auto energy_decide_joint = [&cfg](const TrialScenario& tr, const ScoredOutput& so,
                                    double thr) {
    DetectionResult det;
    det.scores = so.scores;
    det.xi_hat = threshold_scores(so.scores, thr, /*soft=*/false);
    det.Xd_hard = hard_decide(so.xd_est, cfg.constellation);
    det.Xd_masked = mask_activity(det.Xd_hard, det.xi_hat);
    (void)tr;
    return det;
  };

  if (name == "b1" || name == "b3") {
    const bool mmse = name == "b3";
    r.score = [&spec, &cfg](const TrialScenario& tr) {
      ScoredOutput so;
      so.h_est = fbs_channel_estimate(tr.rx.pilot_part(), tr.tx.X_P,
                                      spec.baseline.mu_h, spec.baseline.K_iter,
                                      spec.baseline.tol, cfg.M);
      so.scores = column_energies(so.h_est);
      return so;
    };
    r.decide = [&spec, &cfg, mmse](const TrialScenario& tr, const ScoredOutput& so,
                                   double thr) {
      DetectionResult det;
      det.scores = so.scores;
      det.xi_hat = threshold_scores(so.scores, thr, false);
      CMat hm = mask_columns(so.h_est, det.xi_hat);
      CMat xd = mmse ? mmse_detect(tr.rx.data_part(), hm, det.xi_hat, tr.rx.N0,
                                   spec.baseline.prior_var)
                     : ls_detect(tr.rx.data_part(), hm, det.xi_hat);
      det.Xd_hard = hard_decide(xd, cfg.constellation);
      det.Xd_masked = mask_activity(det.Xd_hard, det.xi_hat);
      return det;
    };
  } else if (name == "b5" || name == "boxfbs" || name == "pme") {
    r.score = [&spec, &cfg, name](const TrialScenario& tr) {
      FbsState st = init_state(tr, spec, cfg);
      SolverParams sp = solver_for(spec, cfg);
      if (name == "b5")
        st = baseline5_jacd(tr.rx.Y, tr.tx.X_P, sp, std::move(st));
      else if (name == "boxfbs")
        st = run_box_fbs(tr.rx.Y, tr.tx.X_P, sp, std::move(st));
      else
        st = run_pme_jacd(tr.rx.Y, tr.tx.X_P, sp, cfg.constellation, cfg.alpha,
                          {}, std::move(st));
      ScoredOutput so;
      so.h_est = std::move(st.H);
      so.xd_est = std::move(st.Xd);
      so.scores = column_energies(so.h_est);
      return so;
    };
    r.decide = energy_decide_joint;
  } else if (name == "du-abc" || name == "du-poem") {
    const UnfoldedParams* params = name == "du-abc" ? du_abc : du_poem;
    if (params == nullptr)
      throw ConfigError("config: receiver " + name +
                        " requires a trained parameter file ([du] section)");
    r.soft = true;
    r.score = [&spec, &cfg, params](const TrialScenario& tr) {
      FbsState st = init_state(tr, spec, cfg);
      DuOutput out = run_du(tr.rx.Y, tr.tx.X_P, *params, cfg.constellation,
                            cfg.B, cfg.M, st.H, st.Xd);
      ScoredOutput so;
      so.h_est = std::move(out.H);
      so.xd_est = std::move(out.Xd);
      so.scores = std::move(out.scores);
      return so;
    };
    r.decide = [&cfg](const TrialScenario& tr, const ScoredOutput& so, double thr) {
      DetectionResult det;
      det.scores = so.scores;
      det.xi_hat = threshold_scores(so.scores, thr, /*soft=*/true);
      det.Xd_hard = hard_decide(so.xd_est, cfg.constellation);
      det.Xd_masked = mask_activity(det.Xd_hard, det.xi_hat);
      (void)tr;
      return det;
    };
  } else {
    throw ConfigError("config: unknown receiver '" + name + "'");
  }
  return r;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

// Threshold minimizing the pooled activity error count over (score, truth)
// pairs; descending sort-and-scan.
double calibrate_threshold(std::vector<std::pair<double, int>> pool, bool soft) {
  if (pool.empty()) return soft ? 0.5 : 0.0;
  std::sort(pool.begin(), pool.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  const int S = static_cast<int>(pool.size());
  int actives = 0;
  for (const auto& pr : pool) actives += pr.second;
  // Declaring the top-k entries active gives k - hits(k) false alarms and
  // actives - hits(k) misses.
  int hits = 0, best_k = 0;
  int best_err = actives;  // k = 0: everything declared inactive
  for (int k = 1; k <= S; ++k) {
    hits += pool[k - 1].second;
    if (k < S && pool[k - 1].first == pool[k].first) continue;  // unrealizable cut
    const int err = (k - hits) + (actives - hits);
    if (err < best_err) {
      best_err = err;
      best_k = k;
    }
  }
  if (best_k == 0) return pool.front().first + 1.0;
  if (best_k == S) {
    const double lo = pool.back().first;
    return soft ? lo - 1e-9 : lo;
  }
  return 0.5 * (pool[best_k - 1].first + pool[best_k].first);
}

ScenarioConfig sweep_config(const ExperimentSpec& spec, double value) {
  ScenarioConfig cfg = spec.scenario;
  if (spec.sweep == "P")
    cfg.P = static_cast<int>(value);
  else if (spec.sweep == "alpha")
    cfg.alpha = value;
  return cfg;
}

std::string sweep_label(const ExperimentSpec& spec, double value) {
  if (spec.sweep == "none") return "none";
  return format_double(value);
}

struct TrialOutcome {
  TrialMetrics metrics;
  bool ok = false;
  std::string error;
};

}  // namespace

void ExperimentSpec::validate() const {
  scenario.validate();
  if (trials < 1) throw ConfigError("config: trials must be >= 1");
  if (sweep != "none" && sweep != "P" && sweep != "alpha")
    throw ConfigError("config: sweep must be none, P or alpha");
  if (sweep != "none" && sweep_values.empty())
    throw ConfigError("config: sweep set but sweep_values empty");
  if (receivers.empty()) throw ConfigError("config: no receivers selected");
  for (const std::string& r : receivers)
    if (std::find(kKnownReceivers.begin(), kKnownReceivers.end(), r) ==
        kKnownReceivers.end())
      throw ConfigError("config: unknown receiver '" + r + "'");
  if (calibration_trials < 1)
    throw ConfigError("config: calibration_trials must be >= 1");
  if (threads < 1) throw ConfigError("config: threads must be >= 1");
  if (solver.pme_damping <= 0.0 || solver.pme_damping > 1.0)
    throw ConfigError("config: pme_damping must be in (0, 1]");
}

ExperimentSpec parse_config_text(const std::string& text) {
  ExperimentSpec spec;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (s.front() == '[' && s.back() == ']') {
      section = s.substr(1, s.size() - 2);
      if (section != "scenario" && section != "experiment" && section != "solver" &&
          section != "baseline" && section != "du" && section != "train")
        throw ConfigError("config: unknown section [" + section + "]");
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " is not key=value");
    std::string key = trim(s.substr(0, eq));
    std::string val = trim(s.substr(eq + 1));
    if (section == "scenario") {
      auto& c = spec.scenario;
      if (key == "P") c.P = to_i(val, key);
      else if (key == "M") c.M = to_i(val, key);
      else if (key == "N") c.N = to_i(val, key);
      else if (key == "alpha") c.alpha = to_d(val, key);
      else if (key == "R_P") c.R_P = to_i(val, key);
      else if (key == "R_D") c.R_D = to_i(val, key);
      else if (key == "area_side") c.area_side = to_d(val, key);
      else if (key == "sigma_sh_db") c.sigma_sh_db = to_d(val, key);
      else if (key == "fc_mhz") c.fc_mhz = to_d(val, key);
      else if (key == "bandwidth_hz") c.bandwidth_hz = to_d(val, key);
      else if (key == "noise_figure_db") c.noise_figure_db = to_d(val, key);
      else if (key == "tx_power_w") c.tx_power_w = to_d(val, key);
      else if (key == "power_ctrl_range_db") c.power_ctrl_range_db = to_d(val, key);
      else throw ConfigError("config: unknown scenario key '" + key + "'");
    } else if (section == "experiment") {
      if (key == "receivers") {
        spec.receivers.clear();
        for (const std::string& r : split(val, ','))
          if (!trim(r).empty()) spec.receivers.push_back(trim(r));
      } else if (key == "trials") spec.trials = to_i(val, key);
      else if (key == "seed") spec.seed = static_cast<std::uint64_t>(to_d(val, key));
      else if (key == "sweep") spec.sweep = val;
      else if (key == "sweep_values") spec.sweep_values = to_dlist(val, key);
      else if (key == "roc_thresholds") spec.roc_thresholds = to_dlist(val, key);
      else if (key == "calibration_trials") spec.calibration_trials = to_i(val, key);
      else if (key == "threads") spec.threads = to_i(val, key);
      else throw ConfigError("config: unknown experiment key '" + key + "'");
    } else if (section == "solver") {
      auto& p = spec.solver;
      if (key == "mu_h") p.mu_h = to_d(val, key);
      else if (key == "mu_x") p.mu_x = to_d(val, key);
      else if (key == "lambda") p.lambda = to_d(val, key);
      else if (key == "tau") p.tau = to_d(val, key);
      else if (key == "K") p.K = to_i(val, key);
      else if (key == "tol") p.tol = to_d(val, key);
      else if (key == "pme_damping") p.pme_damping = to_d(val, key);
      else throw ConfigError("config: unknown solver key '" + key + "'");
    } else if (section == "baseline") {
      auto& b = spec.baseline;
      if (key == "K_iter") b.K_iter = to_i(val, key);
      else if (key == "tol") b.tol = to_d(val, key);
      else if (key == "mu_h") b.mu_h = to_d(val, key);
      else if (key == "prior_var") b.prior_var = to_d(val, key);
      else throw ConfigError("config: unknown baseline key '" + key + "'");
    } else if (section == "du") {
      if (key == "abc_params") spec.du_abc_params = val;
      else if (key == "poem_params") spec.du_poem_params = val;
      else throw ConfigError("config: unknown du key '" + key + "'");
    } else if (section == "train") {
      auto& t = spec.train;
      if (key == "variant") spec.train_variant = val;
      else if (key == "epochs") t.epochs = to_i(val, key);
      else if (key == "scenarios_per_epoch") t.scenarios_per_epoch = to_i(val, key);
      else if (key == "batch") t.batch = to_i(val, key);
      else if (key == "lr") t.lr = to_d(val, key);
      else if (key == "val_fraction") t.val_fraction = to_d(val, key);
      else if (key == "K") t.K = to_i(val, key);
      else if (key == "init_iters") t.init_iters = to_i(val, key);
      else throw ConfigError("config: unknown train key '" + key + "'");
    } else {
      throw ConfigError("config: key '" + key + "' outside any section");
    }
  }
  return spec;
}

ExperimentSpec parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

ExperimentResult run_experiment_with(
    const ExperimentSpec& spec,
    const std::vector<std::pair<std::string, Receiver>>& receivers) {
  spec.validate();
  ExperimentResult out;
  std::vector<double> values =
      spec.sweep == "none" ? std::vector<double>{0.0} : spec.sweep_values;

  for (double sv : values) {
    ScenarioConfig cfg = sweep_config(spec, sv);
    cfg.validate();
    CMat pilots = generate_pilots(cfg, mix_seed(spec.seed, 3));
    const std::string label = sweep_label(spec, sv);

    for (const auto& [name, recv] : receivers) {
      std::vector<TrialOutcome> outcomes(spec.trials);
      auto t0 = std::chrono::steady_clock::now();
      parallel_for(spec.trials, spec.threads, [&](int t) {
        try {
          TrialScenario tr =
              make_trial(cfg, pilots, spec.seed + static_cast<std::uint64_t>(t));
          ReceiverResult rr = recv(tr, cfg);
          outcomes[t].metrics =
              compute_metrics(tr.channel.xi, tr.tx.X_D_true, tr.channel.H,
                              rr.det.xi_hat, rr.det.Xd_masked, rr.h_est);
          outcomes[t].ok = true;
        } catch (const std::exception& e) {
          outcomes[t].error = e.what();
        }
      });
      auto t1 = std::chrono::steady_clock::now();

      std::vector<double> uder, nmse, aser;
      int used = 0;
      for (int t = 0; t < spec.trials; ++t) {
        const TrialOutcome& o = outcomes[t];
        if (!o.ok) {
          ++out.aborted_trials;
          out.log.push_back("abort sweep=" + label + " receiver=" + name +
                            " trial=" + std::to_string(t) + ": " + o.error);
          continue;
        }
        ++used;
        uder.push_back(o.metrics.uder);
        nmse.push_back(o.metrics.nmse);
        if (!o.metrics.aser_undefined) aser.push_back(o.metrics.aser);
      }

      ResultRow row;
      row.sweep_label = label;
      row.receiver = name;
      row.trials = used;
      mean_stderr(uder, row.uder, row.uder_se);
      mean_stderr(nmse, row.nmse, row.nmse_se);
      mean_stderr(aser, row.aser, row.aser_se);
      row.wall_s = std::chrono::duration<double>(t1 - t0).count();
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

namespace {

// Calibrates the decision threshold of one staged receiver on a dedicated
// seed stream, then returns the frozen Receiver and records the threshold.
Receiver calibrate_and_freeze(const std::string& name, const StagedReceiver& sr,
                              const ExperimentSpec& spec, const ScenarioConfig& cfg,
                              const CMat& pilots, const std::string& label,
                              std::vector<std::string>& metadata) {
  std::vector<std::vector<std::pair<double, int>>> per_trial(
      spec.calibration_trials);
  parallel_for(spec.calibration_trials, spec.threads, [&](int i) {
    TrialScenario tr = make_trial(
        cfg, pilots, mix_seed(spec.seed, 701) + static_cast<std::uint64_t>(i));
    ScoredOutput so = sr.score(tr);
    auto& dst = per_trial[i];
    dst.reserve(cfg.N);
    for (int n = 0; n < cfg.N; ++n)
      dst.emplace_back(so.scores(n), tr.channel.xi[n]);
  });
  std::vector<std::pair<double, int>> pool;
  pool.reserve(static_cast<size_t>(spec.calibration_trials) * cfg.N);
  for (const auto& v : per_trial) pool.insert(pool.end(), v.begin(), v.end());
  const double thr = calibrate_threshold(std::move(pool), sr.soft);
  metadata.push_back("sweep=" + label + " receiver=" + name +
                     (sr.soft ? " L_bar=" : " T_aud=") + format_double(thr));
  return [sr, thr](const TrialScenario& tr, const ScenarioConfig& c) {
    (void)c;
    ScoredOutput so = sr.score(tr);
    ReceiverResult rr;
    rr.det = sr.decide(tr, so, thr);
    rr.h_est = std::move(so.h_est);
    return rr;
  };
}

void load_du_if_needed(const ExperimentSpec& spec, UnfoldedParams& abc,
                       UnfoldedParams& poem, bool& have_abc, bool& have_poem) {
  for (const std::string& r : spec.receivers) {
    if (r == "du-abc") {
      if (spec.du_abc_params.empty())
        throw ConfigError("config: du-abc requires [du] abc_params");
      abc = load_params(spec.du_abc_params);
      have_abc = true;
    } else if (r == "du-poem") {
      if (spec.du_poem_params.empty())
        throw ConfigError("config: du-poem requires [du] poem_params");
      poem = load_params(spec.du_poem_params);
      have_poem = true;
    }
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  UnfoldedParams abc, poem;
  bool have_abc = false, have_poem = false;
  load_du_if_needed(spec, abc, poem, have_abc, have_poem);

  ExperimentResult out;
  std::vector<double> values =
      spec.sweep == "none" ? std::vector<double>{0.0} : spec.sweep_values;
  for (double sv : values) {
    ScenarioConfig cfg = sweep_config(spec, sv);
    cfg.validate();
    CMat pilots = generate_pilots(cfg, mix_seed(spec.seed, 3));
    const std::string label = sweep_label(spec, sv);

    std::vector<std::pair<std::string, Receiver>> receivers;
    for (const std::string& name : spec.receivers) {
      StagedReceiver sr = make_staged(name, spec, cfg,
                                      have_abc ? &abc : nullptr,
                                      have_poem ? &poem : nullptr);
      receivers.emplace_back(name, calibrate_and_freeze(name, sr, spec, cfg,
                                                        pilots, label,
                                                        out.metadata));
    }

    ExperimentSpec sub = spec;
    sub.sweep = "none";
    sub.scenario = cfg;
    ExperimentResult part = run_experiment_with(sub, receivers);
    for (ResultRow& row : part.rows) {
      row.sweep_label = label;
      out.rows.push_back(std::move(row));
    }
    out.aborted_trials += part.aborted_trials;
    for (std::string& l : part.log) out.log.push_back(std::move(l));
  }
  return out;
}

std::vector<RocRow> run_roc(const ExperimentSpec& spec) {
  spec.validate();
  UnfoldedParams abc, poem;
  bool have_abc = false, have_poem = false;
  load_du_if_needed(spec, abc, poem, have_abc, have_poem);

  std::vector<RocRow> out;
  std::vector<double> values =
      spec.sweep == "none" ? std::vector<double>{0.0} : spec.sweep_values;
  for (double sv : values) {
    ScenarioConfig cfg = sweep_config(spec, sv);
    cfg.validate();
    CMat pilots = generate_pilots(cfg, mix_seed(spec.seed, 3));
    const std::string label = sweep_label(spec, sv);

    for (const std::string& name : spec.receivers) {
      StagedReceiver sr = make_staged(name, spec, cfg,
                                      have_abc ? &abc : nullptr,
                                      have_poem ? &poem : nullptr);
      std::vector<RVec> scores(spec.trials);
      std::vector<std::vector<int>> truth(spec.trials);
      parallel_for(spec.trials, spec.threads, [&](int t) {
        TrialScenario tr =
            make_trial(cfg, pilots, spec.seed + static_cast<std::uint64_t>(t));
        scores[t] = sr.score(tr).scores;
        truth[t] = tr.channel.xi;
      });
      RVec pooled(static_cast<Eigen::Index>(spec.trials) * cfg.N);
      std::vector<int> pooled_truth;
      pooled_truth.reserve(static_cast<size_t>(spec.trials) * cfg.N);
      for (int t = 0; t < spec.trials; ++t) {
        pooled.segment(static_cast<Eigen::Index>(t) * cfg.N, cfg.N) = scores[t];
        pooled_truth.insert(pooled_truth.end(), truth[t].begin(), truth[t].end());
      }
      std::vector<double> grid = spec.roc_thresholds;
      if (grid.empty()) {
        const double lo = pooled.minCoeff(), hi = pooled.maxCoeff();
        const int npts = 101;
        for (int i = 0; i < npts; ++i)
          grid.push_back(lo - 1e-12 +
                         (hi - lo + 2e-12) * static_cast<double>(i) / (npts - 1));
      }
      std::sort(grid.begin(), grid.end());
      for (const RocPoint& pt : roc_sweep(pooled, pooled_truth, grid))
        out.push_back({label, name, pt.threshold, pt.fpr, pt.tpr});
    }
  }
  return out;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  os << "sweep,receiver,trials,uder,uder_se,nmse,nmse_se,aser,aser_se,wall_s\n";
  for (const ResultRow& r : rows)
    os << r.sweep_label << ',' << r.receiver << ',' << r.trials << ','
       << format_double(r.uder) << ',' << format_double(r.uder_se) << ','
       << format_double(r.nmse) << ',' << format_double(r.nmse_se) << ','
       << format_double(r.aser) << ',' << format_double(r.aser_se) << ','
       << format_double(r.wall_s) << '\n';
  return os.str();
}

std::string roc_csv(const std::vector<RocRow>& rows) {
  std::ostringstream os;
  os << "sweep,receiver,threshold,fpr,tpr\n";
  for (const RocRow& r : rows)
    os << r.sweep_label << ',' << r.receiver << ',' << format_double(r.threshold)
       << ',' << format_double(r.fpr) << ',' << format_double(r.tpr) << '\n';
  return os.str();
}

std::string scenario_csv(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  CMat pilots = generate_pilots(cfg, mix_seed(seed, 3));
  TrialScenario tr = make_trial(cfg, pilots, seed);
  std::ostringstream os;
  os << "entity,index,x_m,y_m,active,power_scale\n";
  for (int p = 0; p < cfg.P; ++p)
    os << "ap," << p << ',' << format_double(tr.channel.geom.ap_pos(p, 0)) << ','
       << format_double(tr.channel.geom.ap_pos(p, 1)) << ",-1,-1\n";
  for (int n = 0; n < cfg.N; ++n)
    os << "ue," << n << ',' << format_double(tr.channel.geom.ue_pos(n, 0)) << ','
       << format_double(tr.channel.geom.ue_pos(n, 1)) << ','
       << tr.channel.xi[n] << ',' << format_double(tr.channel.g(n)) << '\n';
  return os.str();
}

}  // namespace jacd
