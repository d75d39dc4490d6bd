// born_sim: command-line front end for the measurement-bifurcation model.

#include <bornsim/cli/commands.hpp>
#include <bornsim/cli/config.hpp>

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <optional>
#include <string>

namespace {

using bornsim::cli::ExperimentConfig;

struct Flags {
  std::string config_path;
  std::optional<double> kappa, xi, psi_plus_sq, psi_phase, phi, dead_zone;
  std::optional<int> n_steps;
  std::optional<std::uint64_t> samples, seed;
  std::optional<std::size_t> bins, export_paths;
  std::optional<unsigned> workers;
  std::optional<std::string> out;
};

void add_common_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_path, "key=value configuration file");
  cmd->add_option("--kappa", f.kappa, "step size kappa in (0, 1)");
  auto* n = cmd->add_option("--n-steps", f.n_steps, "number of apparatus steps N");
  auto* xi = cmd->add_option("--xi", f.xi, "total variance Xi = N kappa^2 (sets N = round(Xi/kappa^2))");
  n->excludes(xi);
  cmd->add_option("--psi-plus-sq", f.psi_plus_sq, "|psi+|^2");
  cmd->add_option("--psi-phase", f.psi_phase, "relative phase of psi- in radians");
  cmd->add_option("--phi", f.phi, "total phase Phi, split evenly over the steps");
  cmd->add_option("--samples", f.samples, "number of Monte Carlo records");
  cmd->add_option("--seed", f.seed, "master seed (falls back to $BORN_SIM_SEED, then 42)");
  cmd->add_option("--dead-zone", f.dead_zone, "half-width of the unclassified zone around Y = 0");
  cmd->add_option("--bins", f.bins, "histogram bins over [-2, 2]");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--workers", f.workers, "worker threads");
  cmd->add_option("--export-paths", f.export_paths, "write full p_n paths for this many trajectories");
}

ExperimentConfig resolve(const Flags& f) {
  ExperimentConfig cfg;
  if (!f.config_path.empty()) cfg = bornsim::cli::load_config_file(f.config_path);
  if (f.kappa) cfg.kappa = *f.kappa;
  // A flag for one of n_steps / xi replaces whichever the file gave.
  if (f.n_steps) {
    cfg.n_steps = f.n_steps;
    cfg.xi.reset();
  }
  if (f.xi) {
    cfg.xi = f.xi;
    cfg.n_steps.reset();
  }
  if (f.psi_plus_sq) cfg.psi_plus_sq = *f.psi_plus_sq;
  if (f.psi_phase) cfg.psi_phase = *f.psi_phase;
  if (f.phi) {
    cfg.phi = f.phi;
    cfg.phases.reset();
  }
  if (f.samples) cfg.samples = *f.samples;
  if (f.seed) cfg.seed = f.seed;
  if (f.dead_zone) cfg.dead_zone = *f.dead_zone;
  if (f.bins) cfg.bins = *f.bins;
  if (f.workers) cfg.workers = *f.workers;
  if (f.export_paths) cfg.export_paths = *f.export_paths;
  if (f.out) cfg.out = *f.out;
  bornsim::cli::apply_seed_fallback(cfg);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Measurement bifurcation model: analytic curves, Monte Carlo, trajectories, "
               "exact enumeration"};
  app.require_subcommand(1);

  Flags flags;
  using Command = std::function<int(const ExperimentConfig&)>;
  std::vector<std::pair<CLI::App*, Command>> commands;
  auto add = [&](const char* name, const char* help, Command fn) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common_flags(cmd, flags);
    commands.emplace_back(cmd, std::move(fn));
  };
  add("analytic", "q, w, Q curves and density-matrix diagnostics", bornsim::cli::cmd_analytic);
  add("sample", "Monte Carlo histograms and Born-frequency estimate", bornsim::cli::cmd_sample);
  add("trajectory", "conditional-probability trajectories", bornsim::cli::cmd_trajectory);
  add("oracle", "exhaustive enumeration (N <= 16) and sampler comparison", bornsim::cli::cmd_oracle);
  add("figure2", "data for the initial and final Y-distribution panels", bornsim::cli::cmd_figure2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return bornsim::cli::kExitConfig;
  }

  for (auto& [cmd, fn] : commands) {
    if (cmd->parsed()) {
      return bornsim::cli::run_guarded([&] { return fn(resolve(flags)); });
    }
  }
  return bornsim::cli::kExitConfig;
}
