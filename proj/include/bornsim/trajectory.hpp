#pragma once

// Stepwise-extension view: the conditional probability p_n of outcome Plus
// after n apparatus steps, driven by eps drawn under the physical measure.
// p_n is a martingale that ends near 0 or 1 with Born weights.

#include <bornsim/error.hpp>
#include <bornsim/model.hpp>
#include <bornsim/numeric.hpp>
#include <bornsim/parallel.hpp>
#include <bornsim/rng.hpp>
#include <bornsim/sampler.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bornsim {

namespace detail {
inline void check_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("probability outside [0, 1]: " + std::to_string(p));
}
inline void check_kappa(double kappa) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw DomainError("kappa must lie in (0, 1)");
}
}  // namespace detail

// p_{n+1} = p (1 + eps kappa) / (p (1 + eps kappa) + (1 - p)(1 - eps kappa))
inline double trajectory_step(double p, int epsilon_next, double kappa) {
  detail::check_probability(p);
  detail::check_kappa(kappa);
  if (epsilon_next != 1 && epsilon_next != -1) throw DomainError("epsilon must be -1 or +1");
  const double up = p * (1.0 + epsilon_next * kappa);
  const double down = (1.0 - p) * (1.0 - epsilon_next * kappa);
  return up / (up + down);
}

// E[p_{n+1} | p_n] - p_n with the two branches weighted by w_{n+1}(s) / (2 w_n).
inline double martingale_residual(double p, double kappa) {
  detail::check_probability(p);
  detail::check_kappa(kappa);
  double expectation = 0.0;
  for (int s : {1, -1}) {
    const double weight = 0.5 * (p * (1.0 + s * kappa) + (1.0 - p) * (1.0 - s * kappa));
    if (weight > 0.0) expectation += weight * trajectory_step(p, s, kappa);
  }
  return expectation - p;
}

struct Trajectory {
  std::vector<double> probabilities;  // p_0..p_N, filled only when the path is kept
  double p_initial = 0.0;
  double p_final = 0.0;
  int final_z = 0;
  double final_y = 0.0;
  std::optional<EpsilonConfig> config;  // kept together with the path
};

// Deterministic path for a given eps, iterating trajectory_step.
inline Trajectory trajectory_from_config(const EpsilonConfig& config, const ModelParams& params,
                                         const QubitState& psi) {
  detail::check_lengths(config, params);
  Trajectory t;
  double p = psi.weight(Outcome::Plus);
  t.p_initial = p;
  t.probabilities.reserve(config.size() + 1);
  t.probabilities.push_back(p);
  for (auto s : config.steps()) {
    p = trajectory_step(p, s, params.kappa());
    t.probabilities.push_back(p);
  }
  t.p_final = p;
  t.final_z = z_sum(config);
  t.final_y = static_cast<double>(t.final_z) / (params.n_steps() * params.kappa());
  t.config = config;
  return t;
}

// Samples eps under the physical measure and tracks p_n through its log-odds,
// which keeps p_n accurate even where it sits within 1e-16 of 0 or 1.
template <typename Rng>
Trajectory sample_trajectory(Rng& rng, const ModelParams& params, const QubitState& psi,
                             bool keep_path = false) {
  detail::PhysicalWalk walk(params, psi);
  Trajectory t;
  auto p_of = [&] { return branch_shares(walk.log_odds(), 0.0).plus; };
  t.p_initial = psi.weight(Outcome::Plus);
  std::vector<std::int8_t> steps;
  if (keep_path) {
    t.probabilities.reserve(static_cast<std::size_t>(params.n_steps()) + 1);
    t.probabilities.push_back(t.p_initial);
    steps.reserve(static_cast<std::size_t>(params.n_steps()));
  }
  for (int n = 0; n < params.n_steps(); ++n) {
    const int s = walk.step(rng);
    if (keep_path) {
      steps.push_back(static_cast<std::int8_t>(s));
      t.probabilities.push_back(p_of());
    }
  }
  t.p_final = p_of();
  t.final_z = walk.z();
  t.final_y = static_cast<double>(t.final_z) / (params.n_steps() * params.kappa());
  if (keep_path) t.config = EpsilonConfig(std::move(steps));
  return t;
}

struct TrajectoryOptions {
  std::uint64_t n_trajectories = 100000;
  std::uint64_t seed = 42;
  unsigned workers = 1;
  std::size_t bins = 50;        // terminal p_N histogram over [0, 1]
  std::size_t keep_paths = 0;   // full paths kept for the first this-many trajectories
  double high = 0.99;
  double low = 0.01;
};

struct TrajectoryEnsemble {
  std::uint64_t n = 0;
  double mean_p_final = 0.0;
  double std_error_p_final = 0.0;
  double fraction_high = 0.0;  // p_N > high
  double fraction_low = 0.0;   // p_N < low
  double fraction_mid = 0.0;
  Histogram terminal;
  std::vector<Trajectory> paths;
};

inline TrajectoryEnsemble run_trajectories(const ModelParams& params, const QubitState& psi,
                                           const TrajectoryOptions& opt) {
  if (opt.n_trajectories == 0) throw ConfigError("n_trajectories must be at least 1");
  const Histogram proto = Histogram::uniform(0.0, 1.0, opt.bins);
  struct Partial {
    Histogram terminal;
    numeric::CompensatedSum sum, sum_sq;
    std::uint64_t high = 0, low = 0;
    std::vector<Trajectory> paths;
  };
  auto partials = map_blocks<Partial>(
      opt.n_trajectories, kRecordBlock, opt.workers, [&](std::size_t begin, std::size_t end) {
        Partial part;
        part.terminal = proto;
        for (std::size_t i = begin; i < end; ++i) {
          SubstreamRng rng(opt.seed, stream_domain::kTrajectory, i);
          Trajectory t = sample_trajectory(rng, params, psi, i < opt.keep_paths);
          part.terminal.add(t.p_final);
          part.sum += t.p_final;
          part.sum_sq += t.p_final * t.p_final;
          if (t.p_final > opt.high) ++part.high;
          if (t.p_final < opt.low) ++part.low;
          if (i < opt.keep_paths) part.paths.push_back(std::move(t));
        }
        return part;
      });

  TrajectoryEnsemble out;
  out.terminal = proto;
  out.n = opt.n_trajectories;
  numeric::CompensatedSum sum, sum_sq;
  std::uint64_t high = 0, low = 0;
  for (Partial& p : partials) {
    out.terminal.merge(p.terminal);
    sum.merge(p.sum);
    sum_sq.merge(p.sum_sq);
    high += p.high;
    low += p.low;
    for (auto& t : p.paths) out.paths.push_back(std::move(t));
  }
  const double n = static_cast<double>(out.n);
  out.mean_p_final = sum.value() / n;
  const double var = std::max(0.0, sum_sq.value() / n - out.mean_p_final * out.mean_p_final);
  out.std_error_p_final = std::sqrt(var / n);
  out.fraction_high = static_cast<double>(high) / n;
  out.fraction_low = static_cast<double>(low) / n;
  out.fraction_mid = static_cast<double>(out.n - high - low) / n;
  return out;
}

// Largest |martingale_residual| over p in {0, 1/(n-1), ..., 1} at fixed kappa.
inline double max_martingale_residual(double kappa, std::size_t n_points = 1001) {
  double worst = 0.0;
  for (std::size_t i = 0; i < n_points; ++i) {
    const double p = static_cast<double>(i) / static_cast<double>(n_points - 1);
    worst = std::max(worst, std::abs(martingale_residual(p, kappa)));
  }
  return worst;
}

}  // namespace bornsim
