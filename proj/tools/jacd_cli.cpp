// Command-line front end: Monte-Carlo simulation, ROC sweeps, deep-unfolded
// training/evaluation and scenario dumps.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "jacd/harness.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool config_required) {
  auto* c = cmd->add_option("--config", a.config, "experiment config file");
  if (config_required) c->required();
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--seed", a.seed, "base seed override")
      ->each([&a](const std::string&) { a.seed_set = true; });
  cmd->add_option("--threads", a.threads, "worker thread count override");
}

jacd::ExperimentSpec load_spec(const CommonArgs& a) {
  jacd::ExperimentSpec spec = a.config.empty() ? jacd::ExperimentSpec{}
                                               : jacd::parse_config(a.config);
  if (a.seed_set) spec.seed = a.seed;
  if (a.threads > 0) spec.threads = a.threads;
  spec.validate();
  return spec;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
}

void write_metadata(const std::filesystem::path& dir,
                    const jacd::ExperimentResult& res) {
  std::ostringstream os;
  for (const std::string& m : res.metadata) os << m << "\n";
  os << "aborted_trials=" << res.aborted_trials << "\n";
  for (const std::string& l : res.log) os << l << "\n";
  write_file(dir / "metadata.txt", os.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grant-free cell-free massive MIMO joint detection simulator"};
  app.require_subcommand(1);

  CommonArgs sim_a, roc_a, train_a, eval_a, dump_a;
  CLI::App* sim = app.add_subcommand("simulate", "run a Monte-Carlo experiment");
  add_common(sim, sim_a, true);
  CLI::App* roc = app.add_subcommand("roc", "sweep detection ROC curves");
  add_common(roc, roc_a, true);
  CLI::App* train = app.add_subcommand("train", "train deep-unfolded parameters");
  add_common(train, train_a, true);
  CLI::App* eval = app.add_subcommand(
      "eval", "run an experiment with trained deep-unfolded parameters");
  add_common(eval, eval_a, true);
  CLI::App* dump = app.add_subcommand("dump-scenario", "write one scenario as CSV");
  add_common(dump, dump_a, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed() || eval->parsed()) {
      const CommonArgs& a = sim->parsed() ? sim_a : eval_a;
      jacd::ExperimentSpec spec = load_spec(a);
      std::filesystem::create_directories(a.out);
      jacd::ExperimentResult res = jacd::run_experiment(spec);
      write_file(std::filesystem::path(a.out) / "results.csv",
                 jacd::results_csv(res.rows));
      write_metadata(a.out, res);
      std::cout << "wrote " << (std::filesystem::path(a.out) / "results.csv").string()
                << " (" << res.rows.size() << " rows, " << res.aborted_trials
                << " aborted trials)\n";
    } else if (roc->parsed()) {
      jacd::ExperimentSpec spec = load_spec(roc_a);
      std::filesystem::create_directories(roc_a.out);
      auto rows = jacd::run_roc(spec);
      write_file(std::filesystem::path(roc_a.out) / "roc.csv", jacd::roc_csv(rows));
      std::cout << "wrote " << (std::filesystem::path(roc_a.out) / "roc.csv").string()
                << " (" << rows.size() << " rows)\n";
    } else if (train->parsed()) {
      jacd::ExperimentSpec spec = load_spec(train_a);
      std::filesystem::create_directories(train_a.out);
      jacd::TrainConfig tc = spec.train;
      tc.seed = spec.seed;
      tc.init_mu_h = spec.baseline.mu_h;
      tc.verbose = true;
      jacd::DuVariant variant;
      if (spec.train_variant == "abc")
        variant = jacd::DuVariant::Abc;
      else if (spec.train_variant == "poem")
        variant = jacd::DuVariant::Poem;
      else
        throw jacd::ConfigError("config: train variant must be abc or poem");
      jacd::UnfoldedParams p0 = jacd::init_unfolded_params(
          spec.scenario, variant, tc.K, spec.baseline.mu_h, spec.solver.mu_x,
          spec.seed);
      jacd::TrainResult tr = jacd::train(spec.scenario, tc, p0);
      const auto path = std::filesystem::path(train_a.out) /
                        ("du-" + spec.train_variant + ".params");
      jacd::save_params(tr.params, path.string());
      std::cout << "initial val loss " << tr.initial_val_loss << ", best "
                << tr.best_val_loss << ", wrote " << path.string() << "\n";
      if (tr.aborted) {
        std::cerr << "training aborted on non-finite loss; wrote last good "
                     "checkpoint\n";
        return 2;
      }
    } else if (dump->parsed()) {
      jacd::ExperimentSpec spec = load_spec(dump_a);
      std::filesystem::create_directories(dump_a.out);
      write_file(std::filesystem::path(dump_a.out) / "scenario.csv",
                 jacd::scenario_csv(spec.scenario, spec.seed ? spec.seed : 1));
      std::cout << "wrote "
                << (std::filesystem::path(dump_a.out) / "scenario.csv").string()
                << "\n";
    }
  } catch (const jacd::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
