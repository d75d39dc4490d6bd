#pragma once

// Subcommand bodies for the born_sim tool. Each writes its files into
// config.out and returns a process exit code; exceptions are mapped to exit
// codes by run_guarded().

#include <bornsim/analytic.hpp>
#include <bornsim/cli/config.hpp>
#include <bornsim/cli/output.hpp>
#include <bornsim/error.hpp>
#include <bornsim/model.hpp>
#include <bornsim/oracle.hpp>
#include <bornsim/sampler.hpp>
#include <bornsim/trajectory.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <complex>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

namespace bornsim::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitIo = 2,
  kExitCapacity = 3,
  kExitInvariant = 4,  // oracle found an exact identity violated
};

using Json = nlohmann::ordered_json;

inline constexpr std::size_t kCurvePoints = 801;  // [-2, 2] in steps of 0.005

namespace detail {

inline Json params_json(const ExperimentConfig& cfg, const ModelParams& params) {
  return Json{{"kappa", params.kappa()},
              {"n_steps", params.n_steps()},
              {"xi", params.xi()},
              {"psi_plus_sq", cfg.psi_plus_sq},
              {"psi_phase", cfg.psi_phase},
              {"phi", params.total_phase()},
              {"seed", cfg.seed_or_default()}};
}

inline Json matrix_json(const DensityMatrix2& rho) {
  return Json{{"rho_pp", rho.pp()},
              {"rho_mm", rho.mm()},
              {"rho_pm_re", rho.pm().real()},
              {"rho_pm_im", rho.pm().imag()},
              {"rho_pm_abs", std::abs(rho.pm())},
              {"trace", rho.trace()},
              {"purity", rho.purity()}};
}

inline Json born_json(const BornEstimate& b) {
  return Json{{"n_samples", b.n_samples},  {"n_plus", b.n_plus},
              {"frequency_plus", b.frequency_plus}, {"standard_error", b.standard_error},
              {"lower", b.lower},          {"upper", b.upper}};
}

inline std::string histogram_csv(const Histogram& h) {
  CsvTable t{"bin_lo", "bin_hi", "count"};
  for (std::size_t b = 0; b < h.bins(); ++b) t.row(h.lo(b), h.hi(b), h.counts()[b]);
  return t.text();
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

inline void warn_large_kappa(const ModelParams& params) {
  if (params.kappa() > kKappaWarning) {
    std::cerr << "warning: kappa = " << params.kappa()
              << " is outside the small-step regime (kappa <= 0.3); asymptotic forms degrade\n";
  }
}

inline EnsembleOptions ensemble_options(const ExperimentConfig& cfg) {
  EnsembleOptions opt;
  opt.n_samples = cfg.samples;
  opt.seed = cfg.seed_or_default();
  opt.workers = cfg.workers;
  opt.dead_zone = cfg.dead_zone;
  opt.bins = cfg.bins;
  return opt;
}

}  // namespace detail

inline int cmd_analytic(const ExperimentConfig& cfg) {
  const ModelParams params = cfg.params();
  const QubitState psi = cfg.psi();
  detail::warn_large_kappa(params);
  const auto dir = prepare_output_dir(cfg.out);
  const double xi = params.xi();
  const double phi = params.total_phase();

  const std::vector<double> grid = uniform_grid(-2.0, 2.0, kCurvePoints);
  CsvTable curves{"y", "q", "w", "Q"};
  for (double y : grid) {
    curves.row(y, q_density(y, xi), std::exp(rate_function(y, xi, psi)), final_density(y, xi, psi));
  }
  write_text_file(dir / "analytic_curves.csv", curves.text());

  const DistributionCurve q_curve = initial_curve(xi, grid);
  const DistributionCurve big_q_curve = final_curve(xi, psi, grid);
  const DensityMatrix2 mean = mean_final_density_matrix(xi, phi, psi);
  const std::complex<double> closed = mean_coherence_closed_form(xi, phi, psi);
  const SeparationReport sep = separation_diagnostics(xi, psi, cfg.dead_zone);

  Json rho_at = Json::array();
  for (double y : {-1.0, 0.0, 1.0}) {
    Json e = detail::matrix_json(density_matrix(y, phi, xi, psi));
    e["y"] = y;
    rho_at.push_back(std::move(e));
  }
  Json grid_peaks = Json::array();
  for (std::size_t i : big_q_curve.local_maxima()) grid_peaks.push_back(grid[i]);

  Json j;
  j["params"] = detail::params_json(cfg, params);
  j["q_integral"] = q_curve.trapezoid_integral();
  j["Q_integral"] = big_q_curve.trapezoid_integral();
  j["Q_grid_maxima"] = std::move(grid_peaks);
  j["Q_peaks"] = final_density_peaks(xi, psi);
  j["mean_density_matrix"] = detail::matrix_json(mean);
  j["mean_coherence_closed_form"] = {{"re", closed.real()}, {"im", closed.imag()},
                                     {"abs", std::abs(closed)}};
  j["separation"] = {{"dead_zone", cfg.dead_zone},
                     {"unclassified_mass", sep.unclassified_mass},
                     {"cross_mass_plus", sep.cross_mass_plus},
                     {"cross_mass_minus", sep.cross_mass_minus},
                     {"peak_mass_plus", sep.peak_mass_plus},
                     {"peak_mass_minus", sep.peak_mass_minus},
                     {"half_line_mass_plus", sep.half_line_mass_plus},
                     {"half_line_mass_minus", sep.half_line_mass_minus}};
  j["density_matrix_at"] = std::move(rho_at);
  detail::write_json(dir / "analytic.json", j);
  return kExitOk;
}

inline int cmd_sample(const ExperimentConfig& cfg) {
  const ModelParams params = cfg.params();
  const QubitState psi = cfg.psi();
  detail::warn_large_kappa(params);
  const auto dir = prepare_output_dir(cfg.out);
  const EnsembleOptions opt = detail::ensemble_options(cfg);

  const Histogram uniform = run_uniform_histogram(params, opt);
  const PhysicalEnsemble phys = run_physical_ensemble(params, psi, opt);
  write_text_file(dir / "hist_uniform.csv", detail::histogram_csv(uniform));
  write_text_file(dir / "hist_physical.csv", detail::histogram_csv(phys.all));

  Json j;
  j["params"] = detail::params_json(cfg, params);
  j["born"] = detail::born_json(phys.born);
  j["expected_frequency_plus"] = psi.weight(Outcome::Plus);
  j["subensembles"] = {{"dead_zone", cfg.dead_zone},
                       {"omega_plus", phys.omega_plus},
                       {"omega_minus", phys.omega_minus},
                       {"unclassified", phys.unclassified}};
  j["sign_disagreements"] = phys.sign_disagreements;
  j["mean_y"] = phys.mean_y;
  j["out_of_range"] = {{"uniform", uniform.underflow() + uniform.overflow()},
                       {"physical", phys.all.underflow() + phys.all.overflow()}};
  detail::write_json(dir / "born.json", j);
  return kExitOk;
}

inline int cmd_trajectory(const ExperimentConfig& cfg) {
  const ModelParams params = cfg.params();
  const QubitState psi = cfg.psi();
  detail::warn_large_kappa(params);
  const auto dir = prepare_output_dir(cfg.out);

  TrajectoryOptions opt;
  opt.n_trajectories = cfg.samples;
  opt.seed = cfg.seed_or_default();
  opt.workers = cfg.workers;
  opt.keep_paths = cfg.export_paths;
  const TrajectoryEnsemble ens = run_trajectories(params, psi, opt);

  write_text_file(dir / "terminal_hist.csv", detail::histogram_csv(ens.terminal));
  if (cfg.export_paths > 0) {
    CsvTable paths{"trajectory", "step", "p"};
    for (std::size_t t = 0; t < ens.paths.size(); ++t) {
      const auto& probs = ens.paths[t].probabilities;
      for (std::size_t n = 0; n < probs.size(); ++n) paths.row(t, n, probs[n]);
    }
    write_text_file(dir / "paths.csv", paths.text());
  }

  Json j;
  j["params"] = detail::params_json(cfg, params);
  j["n_trajectories"] = ens.n;
  j["mean_p_final"] = ens.mean_p_final;
  j["std_error_p_final"] = ens.std_error_p_final;
  j["p_initial"] = psi.weight(Outcome::Plus);
  j["fraction_above_0.99"] = ens.fraction_high;
  j["fraction_below_0.01"] = ens.fraction_low;
  j["fraction_between"] = ens.fraction_mid;
  j["max_martingale_residual"] = max_martingale_residual(params.kappa());
  detail::write_json(dir / "trajectory.json", j);
  return kExitOk;
}

inline int cmd_oracle(const ExperimentConfig& cfg) {
  const ModelParams params = cfg.params();
  const QubitState psi = cfg.psi();
  detail::warn_large_kappa(params);
  const ExactReport report = enumerate_all(params, psi, cfg.workers);
  const auto dir = prepare_output_dir(cfg.out);

  const auto checks = exact_invariants(report);
  bool all_ok = true;
  Json inv = Json::array();
  for (const auto& c : checks) {
    all_ok = all_ok && c.ok();
    inv.push_back({{"name", c.name}, {"value", c.value}, {"expected", c.expected},
                   {"tolerance", c.tolerance}, {"ok", c.ok()}});
  }

  Json z_law = Json::array();
  for (std::size_t k = 0; k < report.z_uniform.size(); ++k) {
    z_law.push_back({{"z", report.z_of_index(k)}, {"uniform", report.z_uniform[k]},
                     {"physical", report.z_physical[k]}});
  }
  Json r;
  r["params"] = detail::params_json(cfg, params);
  r["mean_w"] = report.mean_w;
  r["mean_rate_plus"] = report.mean_rate_plus;
  r["mean_rate_minus"] = report.mean_rate_minus;
  r["exact_p_plus"] = report.exact_p_plus;
  r["invariants"] = std::move(inv);
  r["z_distribution"] = std::move(z_law);
  r["config_weights"] = report.config_weights;
  detail::write_json(dir / "exact_report.json", r);

  const EmpiricalDistribution emp =
      tabulate_physical_sampler(params, psi, cfg.samples, cfg.seed_or_default(), cfg.workers);
  const DivergenceReport div = compare_sampler(report, emp);
  Json d;
  d["n_draws"] = emp.n_draws;
  d["total_variation"] = div.total_variation;
  d["tv_bound"] = div.tv_bound;
  d["within_bound"] = div.within_bound;
  d["flagged_configs"] = div.flagged_configs;
  d["max_z_sigma"] = div.max_z_sigma;
  d["max_z_abs"] = div.max_z_abs;
  d["worst_z"] = div.worst_z;
  detail::write_json(dir / "divergence.json", d);

  if (!all_ok) {
    std::cerr << "error: exact invariant violated beyond tolerance\n";
    return kExitInvariant;
  }
  return kExitOk;
}

inline int cmd_figure2(const ExperimentConfig& cfg) {
  const ModelParams params = cfg.params();
  const QubitState psi = cfg.psi();
  detail::warn_large_kappa(params);
  const auto dir = prepare_output_dir(cfg.out);
  const double xi = params.xi();
  const EnsembleOptions opt = detail::ensemble_options(cfg);

  const Histogram uniform = run_uniform_histogram(params, opt);
  const PhysicalEnsemble phys = run_physical_ensemble(params, psi, opt);
  const double n = static_cast<double>(opt.n_samples);

  CsvTable panel_a{"y", "q", "empirical_density"};
  CsvTable panel_b{"y", "Q", "empirical_density"};
  double integral_a = 0.0, integral_b = 0.0;
  for (std::size_t b = 0; b < uniform.bins(); ++b) {
    const double width = uniform.hi(b) - uniform.lo(b);
    const double y = uniform.center(b);
    const double da = static_cast<double>(uniform.counts()[b]) / (n * width);
    const double db = static_cast<double>(phys.all.counts()[b]) / (n * width);
    integral_a += da * width;
    integral_b += db * width;
    panel_a.row(y, q_density(y, xi), da);
    panel_b.row(y, final_density(y, xi, psi), db);
  }
  write_text_file(dir / "figure2a.csv", panel_a.text());
  write_text_file(dir / "figure2b.csv", panel_b.text());

  const SeparationReport sep = separation_diagnostics(xi, psi, cfg.dead_zone);
  Json j;
  j["params"] = detail::params_json(cfg, params);
  const DistributionCurve q_curve = initial_curve(xi, uniform_grid(-2.0, 2.0, kCurvePoints));
  Json q_peaks = Json::array();
  for (std::size_t i : q_curve.local_maxima()) q_peaks.push_back(q_curve.grid()[i]);
  j["q_peaks"] = std::move(q_peaks);
  j["Q_peaks"] = final_density_peaks(xi, psi);
  j["peak_mass_plus"] = sep.peak_mass_plus;
  j["peak_mass_minus"] = sep.peak_mass_minus;
  j["half_line_mass_plus"] = sep.half_line_mass_plus;
  j["half_line_mass_minus"] = sep.half_line_mass_minus;
  j["empirical_integral_a"] = integral_a;
  j["empirical_integral_b"] = integral_b;
  j["born"] = detail::born_json(phys.born);
  detail::write_json(dir / "figure2.json", j);
  return kExitOk;
}

// Runs a command, mapping library exceptions onto the exit-code contract.
inline int run_guarded(const std::function<int()>& body, std::ostream& err = std::cerr) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const CapacityError& e) {
    err << "capacity error: " << e.what() << '\n';
    return kExitCapacity;
  }
}

}  // namespace bornsim::cli
