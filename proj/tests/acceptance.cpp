// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <bornsim/bornsim.hpp>
#include <bornsim/cli/commands.hpp>

#include "support/cli_run.hpp"

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace bornsim;
namespace bt = bornsim::testing;

namespace {

const std::string kExe = BORN_SIM_EXE;
const QubitState kFigurePsi = QubitState::from_probability(0.6);
const ModelParams kFigureParams(0.1, 2000);
constexpr double kFigureXi = 20.0;

struct CriterionResult {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

EpsilonConfig random_config(std::mt19937_64& gen, int n) {
  std::vector<std::int8_t> s(static_cast<std::size_t>(n));
  for (auto& x : s) x = (gen() & 1U) ? 1 : -1;
  return EpsilonConfig(std::move(s));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Figure 2 parameters: analytic peaks, peak masses, physical histogram, runtime.
void ac1(CriterionResult& r) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto peaks = final_density_peaks(kFigureXi, kFigurePsi);
  r.require(peaks.size() == 2, "Q(Y) must have exactly two maxima");
  if (peaks.size() == 2) {
    r.detail << " peaks=(" << peaks[0] << ", " << peaks[1] << ")";
    r.require(std::abs(peaks[0] + 1.0) < 0.02 && std::abs(peaks[1] - 1.0) < 0.02,
              "maxima within 0.02 of -1 and +1");
  }
  const SeparationReport sep = separation_diagnostics(kFigureXi, kFigurePsi, 0.5);
  const double ratio_err = std::abs(sep.peak_mass_plus / sep.peak_mass_minus - 1.5);
  r.detail << " mass_ratio_err=" << ratio_err;
  r.require(ratio_err <= 1e-6, "peak-mass ratio 0.6/0.4 within 1e-6");

  EnsembleOptions opt;
  opt.n_samples = 100000;
  opt.seed = 42;
  opt.workers = 1;
  const PhysicalEnsemble e = run_physical_ensemble(kFigureParams, kFigurePsi, opt);
  const auto masses = lattice_bin_masses(
      e.all, kFigureParams, [](double y) { return final_density(y, kFigureXi, kFigurePsi); });
  const BinDeviation dev = poisson_deviation(e.all, masses, 1e5, 4.0);
  r.detail << " worst_bin_sigma=" << dev.max_sigma;
  r.require(dev.bins_over == 0, "every histogram bin within 4 sigma of Q");
  const double sample_seconds = seconds_since(t0);

  // End-to-end figure data through the command, single-threaded.
  const auto dir = bt::fresh_dir("acc_fig2");
  cli::ExperimentConfig cfg;
  cfg.out = dir.string();
  const auto t1 = std::chrono::steady_clock::now();
  r.require(cli::cmd_figure2(cfg) == cli::kExitOk, "figure2 command succeeds");
  const double command_seconds = seconds_since(t1);
  r.detail << " runtime=" << sample_seconds << "s/" << command_seconds << "s";
  r.require(sample_seconds < 120.0 && command_seconds < 120.0, "runtime under 2 minutes");
  std::filesystem::remove_all(dir);
}

void ac2(CriterionResult& r) {
  for (double wp : {0.6, 0.1, 0.5, 0.9}) {
    const BornEstimate b =
        estimate_born(42, kFigureParams, QubitState::from_probability(wp), 100000);
    const double band = wp == 0.6 ? 0.0046 : 3.0 * std::sqrt(wp * (1.0 - wp) / 1e5);
    r.detail << " f(" << wp << ")=" << b.frequency_plus;
    r.require(std::abs(b.frequency_plus - wp) <= band, "frequency within band for " + std::to_string(wp));
  }
}

void ac3(CriterionResult& r) {
  const ExactReport e = enumerate_all(ModelParams(0.1, 12), kFigurePsi);
  const double worst = std::max({std::abs(e.exact_p_plus - 0.6), std::abs(e.mean_w - 1.0),
                                 std::abs(e.mean_rate_plus - 1.0),
                                 std::abs(e.mean_rate_minus - 1.0)});
  r.detail << " p_plus=" << e.exact_p_plus << " max_err=" << worst;
  r.require(worst <= 1e-12, "exact identities within 1e-12");
}

void ac4(CriterionResult& r) {
  double worst = 0.0;
  for (double xi : {1.0, 5.0, 20.0, 100.0}) {
    for (int i = 0; i <= 4000; ++i) {
      const double y = -2.0 + i * 0.001;
      const double lhs = q_density(y, xi) * std::exp(rate_function(y, xi, kFigurePsi));
      const double rhs = 0.6 * q_density(y - 1.0, xi) + 0.4 * q_density(y + 1.0, xi);
      worst = std::max(worst, std::abs(lhs - rhs) / std::abs(rhs));
    }
  }
  r.detail << " max_rel_err=" << worst;
  r.require(worst <= 1e-12, "pointwise relative error within 1e-12");
}

void ac5(CriterionResult& r) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double xi = 0.5 + 150.0 * u(gen);
    const QubitState psi = QubitState::from_probability(u(gen), 6.283 * u(gen));
    const DensityMatrix2 rho = density_matrix(-2.0 + 4.0 * u(gen), 6.283 * u(gen), xi, psi);
    worst = std::max({worst, std::abs(rho.mp() - std::conj(rho.pm())), std::abs(rho.trace() - 1.0),
                      std::abs(rho.purity() - 1.0)});
  }
  r.detail << " grid_err=" << worst;
  r.require(worst <= 1e-12, "Hermitian, unit trace, purity 1 within 1e-12");

  const double xi = 100.0;
  const double bound = std::exp(-xi);
  double worst_ratio = 0.0;
  for (Outcome o : {Outcome::Plus, Outcome::Minus}) {
    const double y = o == Outcome::Plus ? 1.0 : -1.0;
    const DensityMatrix2 rho = density_matrix(y, 0.3, xi, kFigurePsi);
    worst_ratio = std::max(worst_ratio, rho.max_abs_diff(limit_density_matrix(o)) / bound);
  }
  r.detail << " limit_err/e^-Xi=" << worst_ratio;
  r.require(worst_ratio <= 1.0, "rho(+-1) within e^-Xi of the projectors at Xi=100");

  const DensityMatrix2 mean = mean_final_density_matrix(kFigureXi, 0.0, kFigurePsi);
  const double diag_err = std::max(std::abs(mean.pp() - 0.6), std::abs(mean.mm() - 0.4));
  const double coh_err = std::abs(std::abs(mean.pm()) - std::sqrt(0.24) * std::exp(-10.0));
  r.detail << " mean_diag_err=" << diag_err << " mean_coh_err=" << coh_err;
  r.require(diag_err <= 1e-8, "mean diagonal within 1e-8");
  r.require(coh_err <= 1e-10, "mean coherence within 1e-10");
}

void ac6(CriterionResult& r) {
  const ModelParams p(0.2, 10);
  const ExactReport exact = enumerate_all(p, kFigurePsi);
  const EmpiricalDistribution emp = tabulate_physical_sampler(p, kFigurePsi, 1000000, 42);
  const DivergenceReport d = compare_sampler(exact, emp);
  r.detail << " tv=" << d.total_variation << " bound=" << d.tv_bound;
  r.require(d.within_bound, "total variation within 3x multinomial bound");

  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double log_odds = (u(gen) - 0.5) * 200.0;
    const StepProbabilities s = physical_step_probabilities(log_odds, 0.999 * u(gen) + 1e-4);
    worst = std::max(worst, std::abs(s.plus + s.minus - 1.0));
  }
  for (double lo : {numeric::kNegInf, -numeric::kNegInf}) {
    const StepProbabilities s = physical_step_probabilities(lo, 0.3);
    worst = std::max(worst, std::abs(s.plus + s.minus - 1.0));
  }
  r.detail << " step_sum_err=" << worst;
  r.require(worst <= 1e-12, "step probabilities sum to 1 within 1e-12");
}

void ac7(CriterionResult& r) {
  double worst = 0.0;
  for (int i = 0; i <= 200; ++i) {
    for (int k = 1; k <= 95; ++k) {
      worst = std::max(worst, std::abs(martingale_residual(i / 200.0, k / 100.0)));
    }
  }
  r.detail << " martingale=" << worst;
  r.require(worst < 1e-12, "martingale residual below 1e-12");

  TrajectoryOptions opt;
  opt.n_trajectories = 100000;
  opt.seed = 42;
  const TrajectoryEnsemble e = run_trajectories(kFigureParams, kFigurePsi, opt);
  r.detail << " high_fraction=" << e.fraction_high;
  r.require(std::abs(e.fraction_high - 0.6) <= 0.01, "fraction with p_N > 0.99 is 0.6 +- 0.01");

  double gap = 0.0;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    SubstreamRng rng(11, stream_domain::kTrajectory, i);
    const Trajectory t = sample_trajectory(rng, kFigureParams, kFigurePsi, true);
    const auto pr = outcome_probabilities(*t.config, kFigureParams, kFigurePsi, RateMode::ExactProduct);
    gap = std::max(gap, std::abs(t.p_final - pr.plus));
  }
  r.detail << " p_N_gap=" << gap;
  r.require(gap <= 1e-9, "terminal p_N matches outcome probabilities within 1e-9");
}

void ac8(CriterionResult& r) {
  std::mt19937_64 gen(8);
  double product_err = 0.0;
  double worst_gap_ratio = 0.0;
  for (double kappa : {0.01, 0.1, 0.3, 0.6}) {
    for (int n : {1, 10, 200, 2000}) {
      const ModelParams p(kappa, n);
      const double expected = n * std::log1p(-kappa * kappa);
      const double bound = n * kappa * kappa * kappa / (3.0 * (1.0 - kappa));
      for (int t = 0; t < 50; ++t) {
        const EpsilonConfig c = random_config(gen, n);
        const double lp = branch_rate(c, p, Outcome::Plus, RateMode::ExactProduct);
        const double lm = branch_rate(c, p, Outcome::Minus, RateMode::ExactProduct);
        product_err = std::max(product_err, std::abs(std::expm1(lp + lm - expected)));
        for (Outcome o : {Outcome::Plus, Outcome::Minus}) {
          const double gap = std::abs(branch_rate(c, p, o, RateMode::ExactProduct) -
                                      branch_rate(c, p, o, RateMode::Asymptotic));
          worst_gap_ratio = std::max(worst_gap_ratio, gap / bound);
        }
      }
    }
  }
  r.detail << " product_rel_err=" << product_err << " gap/bound=" << worst_gap_ratio;
  r.require(product_err <= 1e-9, "|b+|^2 |b-|^2 = (1-kappa^2)^N within 1e-9");
  r.require(worst_gap_ratio <= 1.0, "exact-asymptotic gap within N kappa^3 / (3 (1 - kappa))");
}

bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b, std::string& why) {
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(a)) {
    const auto name = entry.path().filename();
    ++files;
    if (bt::read_file(entry.path()) != bt::read_file(b / name)) {
      why = name.string();
      return false;
    }
  }
  std::size_t other = 0;
  for ([[maybe_unused]] const auto& entry : std::filesystem::directory_iterator(b)) ++other;
  if (files == 0 || files != other) {
    why = "file sets differ";
    return false;
  }
  return true;
}

void ac9(CriterionResult& r) {
  const std::vector<std::string> commands = {
      "analytic", "sample --samples 20000", "trajectory --samples 20000 --export-paths 3",
      "oracle --n-steps 10 --kappa 0.2 --samples 200000", "figure2 --samples 20000"};
  std::size_t compared = 0;
  for (const auto& cmd : commands) {
    const auto root = bt::fresh_dir("acc_det");
    const auto run1 = root / "run1";
    const auto run2 = root / "run2";
    const auto run8 = root / "workers8";
    const std::string base = cmd + " --seed 1234 --out ";
    const int c1 = bt::run_exe(kExe, base + "'" + run1.string() + "' --workers 1");
    const int c2 = bt::run_exe(kExe, base + "'" + run2.string() + "' --workers 1");
    const int c8 = bt::run_exe(kExe, base + "'" + run8.string() + "' --workers 8");
    const std::string name = cmd.substr(0, cmd.find(' '));
    r.require(c1 == 0 && c2 == 0 && c8 == 0, name + " exits cleanly");
    std::string why;
    r.require(same_tree(run1, run2, why), name + " reruns byte-identical (" + why + ")");
    r.require(same_tree(run1, run8, why), name + " workers 1 vs 8 byte-identical (" + why + ")");
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(run1)) ++compared;
    std::filesystem::remove_all(root);
  }
  r.detail << " files_compared=" << compared;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(CriterionResult&)>>> criteria = {
      {"AC1 Figure 2 reproduction", ac1},
      {"AC2 Born rule, statistical", ac2},
      {"AC3 Born rule, exact enumeration", ac3},
      {"AC4 Gaussian mixture identity", ac4},
      {"AC5 density matrices", ac5},
      {"AC6 sampler exactness", ac6},
      {"AC7 martingale and trajectories", ac7},
      {"AC8 structural identities", ac8},
      {"AC9 determinism", ac9},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    CriterionResult r;
    try {
      check(r);
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail << " [exception: " << e.what() << "]";
    }
    if (!r.pass) ++failures;
    std::printf("[%s] %s:%s\n", r.pass ? "PASS" : "FAIL", name.c_str(), r.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
