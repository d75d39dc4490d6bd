#pragma once

// Configuration-level quantities of the two-branch measurement model: the
// measured qubit, the apparatus micro-configuration eps in {-1,+1}^N, the
// per-step amplitude factors and the resulting branch and total rates.

#include <bornsim/error.hpp>
#include <bornsim/numeric.hpp>

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace bornsim {

enum class Outcome { Plus, Minus };

// j = +1 / -1
constexpr int sign(Outcome o) { return o == Outcome::Plus ? 1 : -1; }

inline const char* to_string(Outcome o) { return o == Outcome::Plus ? "plus" : "minus"; }

enum class RateMode { ExactProduct, Asymptotic };

class QubitState {
 public:
  static constexpr double kNormTolerance = 1e-12;

  QubitState(std::complex<double> psi_plus, std::complex<double> psi_minus)
      : plus_(psi_plus), minus_(psi_minus) {
    const double norm = std::norm(plus_) + std::norm(minus_);
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > kNormTolerance) {
      throw ConfigError("qubit state is not normalized: |psi+|^2 + |psi-|^2 = " +
                        std::to_string(norm));
    }
  }

  // psi+ = sqrt(p), psi- = sqrt(1 - p) e^{i relative_phase}.
  static QubitState from_probability(double p_plus, double relative_phase = 0.0) {
    if (!(p_plus >= 0.0 && p_plus <= 1.0)) {
      throw ConfigError("|psi+|^2 must lie in [0, 1], got " + std::to_string(p_plus));
    }
    return QubitState(std::sqrt(p_plus), std::polar(std::sqrt(1.0 - p_plus), relative_phase));
  }

  std::complex<double> psi_plus() const { return plus_; }
  std::complex<double> psi_minus() const { return minus_; }
  std::complex<double> amplitude(Outcome o) const { return o == Outcome::Plus ? plus_ : minus_; }

  double weight(Outcome o) const { return std::norm(amplitude(o)); }
  double log_weight(Outcome o) const { return numeric::log_norm_sq(std::abs(amplitude(o))); }

 private:
  std::complex<double> plus_;
  std::complex<double> minus_;
};

class ModelParams {
 public:
  // Empty `phases` means phi_n = 0 for every step.
  ModelParams(double kappa, int n_steps, std::vector<double> phases = {})
      : kappa_(kappa), n_steps_(n_steps), phases_(std::move(phases)) {
    if (!(kappa > 0.0 && kappa < 1.0)) {
      throw ConfigError("kappa must lie in (0, 1), got " + std::to_string(kappa));
    }
    if (n_steps < 1) throw ConfigError("n_steps must be positive");
    if (phases_.empty()) phases_.assign(static_cast<std::size_t>(n_steps), 0.0);
    if (phases_.size() != static_cast<std::size_t>(n_steps)) {
      throw ConfigError("phases has " + std::to_string(phases_.size()) + " entries, expected " +
                        std::to_string(n_steps));
    }
    xi_ = static_cast<double>(n_steps_) * kappa_ * kappa_;
    total_phase_ = std::accumulate(phases_.begin(), phases_.end(), 0.0);
  }

  // N = round(xi / kappa^2); the realized Xi = N kappa^2 is reported by xi().
  static ModelParams from_xi(double kappa, double xi, std::vector<double> phases = {}) {
    if (!(kappa > 0.0 && kappa < 1.0)) {
      throw ConfigError("kappa must lie in (0, 1), got " + std::to_string(kappa));
    }
    if (!(xi > 0.0)) throw ConfigError("xi must be positive");
    const double n = std::round(xi / (kappa * kappa));
    if (n < 1.0 || n > 1e9) throw ConfigError("xi / kappa^2 gives an unusable step count");
    return ModelParams(kappa, static_cast<int>(n), std::move(phases));
  }

  double kappa() const { return kappa_; }
  int n_steps() const { return n_steps_; }
  double xi() const { return xi_; }
  std::span<const double> phases() const { return phases_; }
  // Phi = sum of phi_n
  double total_phase() const { return total_phase_; }

  // ln(1 + kappa), ln(1 - kappa)
  double log_up() const { return std::log1p(kappa_); }
  double log_down() const { return std::log1p(-kappa_); }

 private:
  double kappa_;
  int n_steps_;
  std::vector<double> phases_;
  double xi_ = 0.0;
  double total_phase_ = 0.0;
};

class EpsilonConfig {
 public:
  explicit EpsilonConfig(std::vector<std::int8_t> steps) : steps_(std::move(steps)) {
    for (auto s : steps_) {
      if (s != 1 && s != -1) throw ConfigError("epsilon entries must be -1 or +1");
    }
  }

  // Bit n of `bits` set means eps_{n+1} = +1.
  static EpsilonConfig from_bits(std::uint64_t bits, int n_steps) {
    if (n_steps < 1 || n_steps > 64) throw ConfigError("from_bits supports 1..64 steps");
    std::vector<std::int8_t> steps(static_cast<std::size_t>(n_steps));
    for (int n = 0; n < n_steps; ++n) steps[n] = ((bits >> n) & 1U) ? 1 : -1;
    return EpsilonConfig(std::move(steps));
  }

  std::uint64_t to_bits() const {
    if (steps_.size() > 64) throw ConfigError("to_bits supports at most 64 steps");
    std::uint64_t bits = 0;
    for (std::size_t n = 0; n < steps_.size(); ++n) {
      if (steps_[n] == 1) bits |= std::uint64_t{1} << n;
    }
    return bits;
  }

  std::span<const std::int8_t> steps() const { return steps_; }
  std::size_t size() const { return steps_.size(); }
  int operator[](std::size_t n) const { return steps_[n]; }

  friend bool operator==(const EpsilonConfig&, const EpsilonConfig&) = default;

 private:
  std::vector<std::int8_t> steps_;
};

enum class RegisterSlot { Ready, RegisteredPlus, RegisteredMinus };

// |eps;0>_A before the interaction, |beta_j(eps); j>_A after. Labels only.
struct ApparatusStateLabel {
  RegisterSlot slot;
  EpsilonConfig config;
};

inline ApparatusStateLabel initial_label(EpsilonConfig config) {
  return {RegisterSlot::Ready, std::move(config)};
}

inline ApparatusStateLabel daughter_label(EpsilonConfig config, Outcome o) {
  return {o == Outcome::Plus ? RegisterSlot::RegisteredPlus : RegisterSlot::RegisteredMinus,
          std::move(config)};
}

// Complex number held as (log |z|, arg z) so products of thousands of factors
// near 1 neither overflow nor underflow.
struct LogComplex {
  double log_magnitude = 0.0;
  double phase = 0.0;

  double log_norm_sq() const { return 2.0 * log_magnitude; }
  std::complex<double> value() const { return std::polar(std::exp(log_magnitude), phase); }
};

namespace detail {

inline void check_lengths(const EpsilonConfig& config, const ModelParams& params) {
  if (config.size() != static_cast<std::size_t>(params.n_steps())) {
    throw ConfigError("configuration has " + std::to_string(config.size()) +
                      " steps but the model has N = " + std::to_string(params.n_steps()));
  }
}

}  // namespace detail

// Z = sum eps_n
inline int z_sum(const EpsilonConfig& config) {
  int z = 0;
  for (auto s : config.steps()) z += s;
  return z;
}

// Y = Z / (N kappa)
inline double y_coordinate(const EpsilonConfig& config, const ModelParams& params) {
  detail::check_lengths(config, params);
  return static_cast<double>(z_sum(config)) / (params.n_steps() * params.kappa());
}

// b^(j)(eps). ExactProduct multiplies the per-step factors
// (1 + j eps_n kappa / 2 - kappa^2 / 8) e^{i j phi_n / 2};
// Asymptotic is the closed form e^{Xi (jY - 1/2) / 2 + i j Phi / 2}.
inline LogComplex branch_amplitude(const EpsilonConfig& config, const ModelParams& params,
                                   Outcome o, RateMode mode) {
  detail::check_lengths(config, params);
  const int j = sign(o);
  const double kappa = params.kappa();
  LogComplex out;
  out.phase = 0.5 * j * params.total_phase();
  if (mode == RateMode::ExactProduct) {
    // Only two distinct factors occur, so count them.
    const int z = z_sum(config);
    const int n_up = (params.n_steps() + j * z) / 2;  // steps with j eps_n = +1
    const int n_down = params.n_steps() - n_up;
    const double base = 1.0 - 0.125 * kappa * kappa;
    out.log_magnitude = n_up * std::log(base + 0.5 * kappa) + n_down * std::log(base - 0.5 * kappa);
  } else {
    const double y = y_coordinate(config, params);
    out.log_magnitude = 0.5 * params.xi() * (j * y - 0.5);
  }
  return out;
}

// ln |b^(j)(eps)|^2. ExactProduct: sum ln(1 + j eps_n kappa). Asymptotic: j Z kappa - Xi/2.
inline double branch_rate(const EpsilonConfig& config, const ModelParams& params, Outcome o,
                          RateMode mode) {
  detail::check_lengths(config, params);
  const int j = sign(o);
  const int z = z_sum(config);
  if (mode == RateMode::ExactProduct) {
    const int n_up = (params.n_steps() + j * z) / 2;
    const int n_down = params.n_steps() - n_up;
    return n_up * params.log_up() + n_down * params.log_down();
  }
  return j * z * params.kappa() - 0.5 * params.xi();
}

struct BranchRates {
  double log_rate_plus;
  double log_rate_minus;
  double phase_plus;   // Phi / 2
  double phase_minus;  // -Phi / 2
  double log_total_rate;
};

inline BranchRates branch_rates(const EpsilonConfig& config, const ModelParams& params,
                                const QubitState& psi, RateMode mode) {
  BranchRates r{};
  r.log_rate_plus = branch_rate(config, params, Outcome::Plus, mode);
  r.log_rate_minus = branch_rate(config, params, Outcome::Minus, mode);
  r.phase_plus = 0.5 * params.total_phase();
  r.phase_minus = -0.5 * params.total_phase();
  r.log_total_rate = numeric::log_sum_exp(psi.log_weight(Outcome::Plus) + r.log_rate_plus,
                                          psi.log_weight(Outcome::Minus) + r.log_rate_minus);
  return r;
}

// ln w, w = |psi+|^2 |b+|^2 + |psi-|^2 |b-|^2
inline double total_rate(const EpsilonConfig& config, const ModelParams& params,
                         const QubitState& psi, RateMode mode) {
  return branch_rates(config, params, psi, mode).log_total_rate;
}

struct OutcomeProbabilities {
  double plus;
  double minus;

  double of(Outcome o) const { return o == Outcome::Plus ? plus : minus; }
};

// Branch shares of the total rate, from the log-odds of the two weighted rates.
inline OutcomeProbabilities branch_shares(double log_weighted_plus, double log_weighted_minus) {
  if (log_weighted_minus == numeric::kNegInf) return {1.0, 0.0};
  if (log_weighted_plus == numeric::kNegInf) return {0.0, 1.0};
  const double d = log_weighted_plus - log_weighted_minus;
  return {numeric::logistic(d), numeric::logistic(-d)};
}

inline OutcomeProbabilities outcome_probabilities(const EpsilonConfig& config,
                                                  const ModelParams& params,
                                                  const QubitState& psi, RateMode mode) {
  const BranchRates r = branch_rates(config, params, psi, mode);
  return branch_shares(psi.log_weight(Outcome::Plus) + r.log_rate_plus,
                       psi.log_weight(Outcome::Minus) + r.log_rate_minus);
}

}  // namespace bornsim
