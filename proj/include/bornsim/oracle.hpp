#pragma once

// Exhaustive enumeration of all 2^N apparatus configurations (N <= 16). Gives
// exact finite-N expectations and distributions that every statistical
// check in the library is measured against.

#include <bornsim/error.hpp>
#include <bornsim/model.hpp>
#include <bornsim/numeric.hpp>
#include <bornsim/parallel.hpp>
#include <bornsim/rng.hpp>
#include <bornsim/sampler.hpp>

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace bornsim {

inline constexpr int kMaxEnumerationSteps = 16;

struct ExactReport {
  int n_steps = 0;
  double kappa = 0.0;
  double psi_plus_sq = 0.0;

  double mean_w = 0.0;
  double mean_rate_plus = 0.0;
  double mean_rate_minus = 0.0;
  double exact_p_plus = 0.0;  // sum over eps of 2^-N w p_plus

  // Indexed by k = number of +1 steps, Z = 2k - N.
  std::vector<double> z_uniform;
  std::vector<double> z_physical;

  // Indexed by config bits (bit n set <=> eps_{n+1} = +1): 2^-N w(eps).
  std::vector<double> config_weights;

  int z_of_index(std::size_t k) const { return 2 * static_cast<int>(k) - n_steps; }
};

namespace detail {

inline void require_enumerable(const ModelParams& params) {
  if (params.n_steps() > kMaxEnumerationSteps) {
    throw CapacityError("exhaustive enumeration is capped at N = 16 (2^16 configurations); N = " +
                        std::to_string(params.n_steps()) + " needs the Monte Carlo sampler");
  }
}

struct EnumerationPartial {
  numeric::CompensatedSum w, rate_plus, rate_minus, p_plus;
  std::vector<numeric::CompensatedSum> z_uniform, z_physical;
};

}  // namespace detail

// Walks configurations in Gray-code order so each step flips a single eps_n
// and the +1 count k moves by one. Fixed chunking keeps results identical
// for any worker count.
inline ExactReport enumerate_all(const ModelParams& params, const QubitState& psi,
                                 unsigned workers = 1) {
  detail::require_enumerable(params);
  const int n = params.n_steps();
  const std::size_t total = std::size_t{1} << n;
  const double inv_total = std::ldexp(1.0, -n);

  // Rates depend on eps only through k.
  std::vector<double> rate_plus(n + 1), rate_minus(n + 1), log_wp(n + 1), log_wm(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double lp = k * params.log_up() + (n - k) * params.log_down();
    const double lm = k * params.log_down() + (n - k) * params.log_up();
    rate_plus[k] = std::exp(lp);
    rate_minus[k] = std::exp(lm);
    log_wp[k] = psi.log_weight(Outcome::Plus) + lp;
    log_wm[k] = psi.log_weight(Outcome::Minus) + lm;
  }

  ExactReport report;
  report.n_steps = n;
  report.kappa = params.kappa();
  report.psi_plus_sq = psi.weight(Outcome::Plus);
  report.config_weights.assign(total, 0.0);

  constexpr std::size_t kChunk = 4096;
  auto partials = map_blocks<detail::EnumerationPartial>(
      total, kChunk, workers, [&](std::size_t begin, std::size_t end) {
        detail::EnumerationPartial part;
        part.z_uniform.resize(n + 1);
        part.z_physical.resize(n + 1);
        std::uint64_t gray = begin ^ (begin >> 1);
        int k = std::popcount(gray);
        for (std::size_t i = begin; i < end; ++i) {
          if (i != begin) {
            const std::uint64_t flip = std::uint64_t{1} << std::countr_zero(i);
            gray ^= flip;
            k += (gray & flip) ? 1 : -1;
          }
          const double lw = numeric::log_sum_exp(log_wp[k], log_wm[k]);
          const double w = std::exp(lw);
          const double weight = inv_total * w;
          report.config_weights[gray] = weight;
          part.w += weight;
          part.rate_plus += inv_total * rate_plus[k];
          part.rate_minus += inv_total * rate_minus[k];
          part.p_plus += weight * branch_shares(log_wp[k], log_wm[k]).plus;
          part.z_uniform[k] += inv_total;
          part.z_physical[k] += weight;
        }
        return part;
      });

  detail::EnumerationPartial sum;
  sum.z_uniform.resize(n + 1);
  sum.z_physical.resize(n + 1);
  for (const auto& p : partials) {
    sum.w.merge(p.w);
    sum.rate_plus.merge(p.rate_plus);
    sum.rate_minus.merge(p.rate_minus);
    sum.p_plus.merge(p.p_plus);
    for (int k = 0; k <= n; ++k) {
      sum.z_uniform[k].merge(p.z_uniform[k]);
      sum.z_physical[k].merge(p.z_physical[k]);
    }
  }
  report.mean_w = sum.w.value();
  report.mean_rate_plus = sum.rate_plus.value();
  report.mean_rate_minus = sum.rate_minus.value();
  report.exact_p_plus = sum.p_plus.value();
  report.z_uniform.resize(n + 1);
  report.z_physical.resize(n + 1);
  for (int k = 0; k <= n; ++k) {
    report.z_uniform[k] = sum.z_uniform[k].value();
    report.z_physical[k] = sum.z_physical[k].value();
  }
  return report;
}

struct InvariantCheck {
  std::string name;
  double value;
  double expected;
  double tolerance;
  bool ok() const { return std::abs(value - expected) <= tolerance; }
};

// The exact identities an enumeration must satisfy at any N and kappa.
inline std::vector<InvariantCheck> exact_invariants(const ExactReport& r, double tol = 1e-12) {
  numeric::CompensatedSum zu, zp;
  for (double v : r.z_uniform) zu += v;
  for (double v : r.z_physical) zp += v;
  return {
      {"mean_w", r.mean_w, 1.0, tol},
      {"mean_rate_plus", r.mean_rate_plus, 1.0, tol},
      {"mean_rate_minus", r.mean_rate_minus, 1.0, tol},
      {"exact_p_plus", r.exact_p_plus, r.psi_plus_sq, tol},
      {"z_uniform_total", zu.value(), 1.0, tol},
      {"z_physical_total", zp.value(), 1.0, tol},
  };
}

// Sample counts per configuration index, tagged with the model they came from.
struct EmpiricalDistribution {
  int n_steps = 0;
  double kappa = 0.0;
  double psi_plus_sq = 0.0;
  std::uint64_t n_draws = 0;
  std::vector<std::uint64_t> counts;
};

template <typename Sampler>
EmpiricalDistribution tabulate_sampler(const ModelParams& params, const QubitState& psi,
                                       std::uint64_t n_draws, std::uint64_t seed,
                                       unsigned workers, Sampler&& draw) {
  detail::require_enumerable(params);
  const std::size_t total = std::size_t{1} << params.n_steps();
  auto partials = map_blocks<std::vector<std::uint64_t>>(
      n_draws, 1 << 14, workers, [&](std::size_t begin, std::size_t end) {
        std::vector<std::uint64_t> counts(total, 0);
        for (std::size_t i = begin; i < end; ++i) {
          SubstreamRng rng(seed, stream_domain::kOracleCheck, i);
          ++counts[draw(rng).to_bits()];
        }
        return counts;
      });
  EmpiricalDistribution emp{params.n_steps(), params.kappa(), psi.weight(Outcome::Plus), n_draws,
                            std::vector<std::uint64_t>(total, 0)};
  for (const auto& c : partials) {
    for (std::size_t i = 0; i < total; ++i) emp.counts[i] += c[i];
  }
  return emp;
}

inline EmpiricalDistribution tabulate_physical_sampler(const ModelParams& params,
                                                       const QubitState& psi,
                                                       std::uint64_t n_draws, std::uint64_t seed,
                                                       unsigned workers = 1) {
  return tabulate_sampler(params, psi, n_draws, seed, workers,
                          [&](SubstreamRng& rng) { return sample_physical_config(rng, params, psi); });
}

struct DivergenceReport {
  double total_variation = 0.0;
  double tv_bound = 0.0;  // 3 sqrt(2^N / (4 n))
  bool within_bound = false;
  std::vector<std::size_t> flagged_configs;  // |p_hat - p| > 3 sqrt(p (1 - p) / n)
  double max_z_sigma = 0.0;   // worst per-Z deviation in multinomial sigmas
  double max_z_abs = 0.0;
  int worst_z = 0;

  // Negative-control verdict: the sampler is inconsistent with the oracle.
  bool flagged() const { return !within_bound; }
};

inline DivergenceReport compare_sampler(const ExactReport& report,
                                        const EmpiricalDistribution& emp) {
  if (emp.n_steps != report.n_steps || emp.kappa != report.kappa ||
      std::abs(emp.psi_plus_sq - report.psi_plus_sq) > 1e-15 ||
      emp.counts.size() != report.config_weights.size()) {
    throw ConfigError("sampler and oracle were run with different model parameters");
  }
  if (emp.n_draws == 0) throw ConfigError("empirical distribution is empty");
  const double n = static_cast<double>(emp.n_draws);

  DivergenceReport d;
  numeric::CompensatedSum tv;
  std::vector<double> z_hat(report.n_steps + 1, 0.0);
  for (std::size_t i = 0; i < emp.counts.size(); ++i) {
    const double p = report.config_weights[i];
    const double p_hat = static_cast<double>(emp.counts[i]) / n;
    tv += std::abs(p_hat - p);
    if (std::abs(p_hat - p) > 3.0 * std::sqrt(p * (1.0 - p) / n)) d.flagged_configs.push_back(i);
    z_hat[std::popcount(i)] += p_hat;
  }
  d.total_variation = 0.5 * tv.value();
  d.tv_bound = 3.0 * std::sqrt(static_cast<double>(emp.counts.size()) / (4.0 * n));
  d.within_bound = d.total_variation <= d.tv_bound;
  for (std::size_t k = 0; k < z_hat.size(); ++k) {
    const double p = report.z_physical[k];
    const double dev = std::abs(z_hat[k] - p);
    const double sigma = std::sqrt(std::max(p * (1.0 - p), 1e-300) / n);
    if (dev / sigma > d.max_z_sigma) {
      d.max_z_sigma = dev / sigma;
      d.worst_z = report.z_of_index(k);
    }
    d.max_z_abs = std::max(d.max_z_abs, dev);
  }
  return d;
}

}  // namespace bornsim
