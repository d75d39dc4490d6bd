#pragma once

// Monte Carlo over apparatus configurations: the uniform ensemble, the
// rate-weighted physical measure P(eps) = 2^-N w(eps), single measurements,
// subensemble classification, Y histograms and Born-frequency estimates.

#include <bornsim/error.hpp>
#include <bornsim/model.hpp>
#include <bornsim/numeric.hpp>
#include <bornsim/parallel.hpp>
#include <bornsim/rng.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace bornsim {

enum class Subensemble { OmegaPlus, OmegaMinus, Unclassified };

inline const char* to_string(Subensemble s) {
  switch (s) {
    case Subensemble::OmegaPlus: return "omega_plus";
    case Subensemble::OmegaMinus: return "omega_minus";
    default: return "unclassified";
  }
}

// How the outcome of a measurement is drawn once eps is fixed.
enum class OutcomeRule {
  BranchShare,  // p_j = |psi_j|^2 |b^(j)|^2 / w
  SignOfY,      // diagnostic: Plus iff Y > 0, ties broken by the branch share
};

struct MeasurementRecord {
  int z = 0;
  double y = 0.0;
  Outcome outcome = Outcome::Plus;
  double log_rate_plus = 0.0;
  double log_rate_minus = 0.0;
  double log_total_rate = 0.0;
  Subensemble subensemble = Subensemble::Unclassified;
};

inline Subensemble classify_y(double y, double dead_zone) {
  if (!(dead_zone >= 0.0 && dead_zone < 1.0)) throw ConfigError("dead_zone must lie in [0, 1)");
  if (y >= dead_zone && y > 0.0) return Subensemble::OmegaPlus;
  if (y <= -dead_zone && y < 0.0) return Subensemble::OmegaMinus;
  return Subensemble::Unclassified;
}

inline Subensemble classify_subensemble(const MeasurementRecord& record, double dead_zone) {
  return classify_y(record.y, dead_zone);
}

// Conditional law of the next step under the physical measure, given the log
// weighted branch products a = ln(|psi+|^2 B+_n), b = ln(|psi-|^2 B-_n):
// P(eps = s) = w_{n+1}(s) / (2 w_n) = (1 + s kappa tanh((a - b) / 2)) / 2.
struct StepProbabilities {
  double plus;
  double minus;
};

inline StepProbabilities physical_step_probabilities(double log_odds, double kappa) {
  double t;
  if (std::isnan(log_odds)) throw DomainError("log-odds is undefined");
  if (std::isinf(log_odds)) {
    t = log_odds > 0 ? 1.0 : -1.0;
  } else {
    t = std::tanh(0.5 * log_odds);
  }
  const double p = 0.5 * (1.0 + kappa * t);
  return {p, 0.5 * (1.0 - kappa * t)};
}

namespace detail {

// Running state of a configuration drawn sequentially under the physical measure.
class PhysicalWalk {
 public:
  PhysicalWalk(const ModelParams& params, const QubitState& psi)
      : kappa_(params.kappa()),
        log_ratio_step_(params.log_up() - params.log_down()),
        log_odds0_(psi.log_weight(Outcome::Plus) - psi.log_weight(Outcome::Minus)) {}

  // ln(|psi+|^2 B+_n / |psi-|^2 B-_n) = ln(|psi+|^2/|psi-|^2) + z_n ln((1+k)/(1-k))
  double log_odds() const {
    if (std::isinf(log_odds0_)) return log_odds0_;
    return log_odds0_ + z_ * log_ratio_step_;
  }

  template <typename Rng>
  int step(Rng& rng) {
    const StepProbabilities p = physical_step_probabilities(log_odds(), kappa_);
    const int s = rng.uniform() < p.plus ? 1 : -1;
    z_ += s;
    return s;
  }

  int z() const { return z_; }

 private:
  double kappa_;
  double log_ratio_step_;
  double log_odds0_;
  int z_ = 0;
};

}  // namespace detail

// eps_n i.i.d. uniform on {-1, +1}.
template <typename Rng>
EpsilonConfig sample_uniform_config(Rng& rng, const ModelParams& params) {
  const auto n = static_cast<std::size_t>(params.n_steps());
  std::vector<std::int8_t> steps(n);
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 64 == 0) bits = rng();
    steps[i] = (bits & 1U) ? 1 : -1;
    bits >>= 1;
  }
  return EpsilonConfig(std::move(steps));
}

// Z of a uniform configuration without materializing it.
template <typename Rng>
int sample_uniform_z(Rng& rng, const ModelParams& params) {
  int remaining = params.n_steps();
  int ones = 0;
  while (remaining > 0) {
    const int take = std::min(remaining, 64);
    std::uint64_t bits = rng();
    if (take < 64) bits &= (std::uint64_t{1} << take) - 1;
    ones += std::popcount(bits);
    remaining -= take;
  }
  return 2 * ones - params.n_steps();
}

// eps drawn from P(eps) = 2^-N w(eps) by the chain rule, one step at a time.
template <typename Rng>
EpsilonConfig sample_physical_config(Rng& rng, const ModelParams& params, const QubitState& psi) {
  detail::PhysicalWalk walk(params, psi);
  std::vector<std::int8_t> steps(static_cast<std::size_t>(params.n_steps()));
  for (auto& s : steps) s = static_cast<std::int8_t>(walk.step(rng));
  return EpsilonConfig(std::move(steps));
}

// Samples eps physically, then the outcome from the branch share of w.
template <typename Rng>
MeasurementRecord run_measurement(Rng& rng, const ModelParams& params, const QubitState& psi,
                                  double dead_zone = 0.5,
                                  OutcomeRule rule = OutcomeRule::BranchShare) {
  detail::PhysicalWalk walk(params, psi);
  for (int n = 0; n < params.n_steps(); ++n) walk.step(rng);

  MeasurementRecord rec;
  rec.z = walk.z();
  rec.y = static_cast<double>(rec.z) / (params.n_steps() * params.kappa());
  const int n_pos = (params.n_steps() + rec.z) / 2;
  const int n_neg = params.n_steps() - n_pos;
  rec.log_rate_plus = n_pos * params.log_up() + n_neg * params.log_down();
  rec.log_rate_minus = n_pos * params.log_down() + n_neg * params.log_up();
  const double lp = psi.log_weight(Outcome::Plus) + rec.log_rate_plus;
  const double lm = psi.log_weight(Outcome::Minus) + rec.log_rate_minus;
  rec.log_total_rate = numeric::log_sum_exp(lp, lm);

  const OutcomeProbabilities share = branch_shares(lp, lm);
  const double u = rng.uniform();
  if (rule == OutcomeRule::SignOfY && rec.z != 0) {
    rec.outcome = rec.z > 0 ? Outcome::Plus : Outcome::Minus;
  } else {
    rec.outcome = u < share.plus ? Outcome::Plus : Outcome::Minus;
  }
  rec.subensemble = classify_y(rec.y, dead_zone);
  return rec;
}

class Histogram {
 public:
  explicit Histogram(std::vector<double> edges) : edges_(std::move(edges)) {
    if (edges_.size() < 2) throw ConfigError("histogram needs at least one bin");
    for (std::size_t i = 1; i < edges_.size(); ++i) {
      if (!(edges_[i] > edges_[i - 1])) throw ConfigError("histogram edges must increase");
    }
    counts_.assign(edges_.size() - 1, 0);
  }

  static Histogram uniform(double lo, double hi, std::size_t bins) {
    if (bins < 1 || !(hi > lo)) throw ConfigError("histogram needs bins >= 1 and hi > lo");
    std::vector<double> edges(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) {
      edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    }
    return Histogram(std::move(edges));
  }

  Histogram() : Histogram(std::vector<double>{0.0, 1.0}) {}

  // Bin index of x for half-open bins [lo, hi) (last bin closed), or -1 when outside.
  long bin_index(double x) const {
    if (!(x >= edges_.front()) || x > edges_.back()) return -1;
    if (x == edges_.back()) return static_cast<long>(counts_.size()) - 1;
    const auto it = std::upper_bound(edges_.begin(), edges_.end(), x);
    return static_cast<long>(it - edges_.begin()) - 1;
  }

  void add(double x) {
    const long b = bin_index(x);
    if (b < 0) {
      (x < edges_.front() ? underflow_ : overflow_) += 1;
      return;
    }
    ++counts_[static_cast<std::size_t>(b)];
    ++total_;
  }

  void merge(const Histogram& other) {
    if (other.edges_ != edges_) throw ConfigError("cannot merge histograms with different edges");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    total_ += other.total_;
    underflow_ += other.underflow_;
    overflow_ += other.overflow_;
  }

  const std::vector<double>& edges() const { return edges_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::size_t bins() const { return counts_.size(); }
  double lo(std::size_t b) const { return edges_[b]; }
  double hi(std::size_t b) const { return edges_[b + 1]; }
  double center(std::size_t b) const { return 0.5 * (edges_[b] + edges_[b + 1]); }
  // In-range entries; counts sum to this.
  std::uint64_t total() const { return total_; }
  std::uint64_t underflow() const { return underflow_; }
  std::uint64_t overflow() const { return overflow_; }

 private:
  std::vector<double> edges_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
  std::uint64_t underflow_ = 0;
  std::uint64_t overflow_ = 0;
};

// Expected share of each histogram bin for a Y density evaluated on the
// lattice Y = Z / (N kappa), Z = -N, -N+2, ..., N. Each lattice point carries
// density(Y) * dY with dY = 2 / (N kappa) and is binned exactly like a sample.
template <typename Density>
std::vector<double> lattice_bin_masses(const Histogram& hist, const ModelParams& params,
                                       Density&& density) {
  std::vector<double> mass(hist.bins(), 0.0);
  const double scale = params.n_steps() * params.kappa();
  const double dy = 2.0 / scale;
  for (int z = -params.n_steps(); z <= params.n_steps(); z += 2) {
    const double y = static_cast<double>(z) / scale;
    const long b = hist.bin_index(y);
    if (b >= 0) mass[static_cast<std::size_t>(b)] += density(y) * dy;
  }
  return mass;
}

struct BinDeviation {
  double max_sigma = 0.0;  // largest |observed - expected| / sqrt(max(expected, 1))
  std::size_t worst_bin = 0;
  std::size_t bins_over = 0;
};

// Poisson comparison of counts against n * masses, with threshold in sigmas.
inline BinDeviation poisson_deviation(const Histogram& hist, const std::vector<double>& masses,
                                      double n, double threshold) {
  BinDeviation d;
  for (std::size_t b = 0; b < hist.bins(); ++b) {
    const double expected = n * masses[b];
    const double sigma = std::sqrt(std::max(expected, 1.0));
    const double dev = std::abs(static_cast<double>(hist.counts()[b]) - expected) / sigma;
    if (dev > d.max_sigma) {
      d.max_sigma = dev;
      d.worst_bin = b;
    }
    if (dev > threshold) ++d.bins_over;
  }
  return d;
}

struct BornEstimate {
  std::uint64_t n_samples = 0;
  std::uint64_t n_plus = 0;
  double frequency_plus = 0.0;
  double standard_error = 0.0;  // sqrt(f (1 - f) / n)
  double lower = 0.0;           // f - 3 sigma, clipped to [0, 1]
  double upper = 0.0;

  bool covers(double p, double sigmas = 3.0) const {
    return std::abs(frequency_plus - p) <= sigmas * std::sqrt(p * (1.0 - p) / n_samples);
  }
};

inline BornEstimate make_born_estimate(std::uint64_t n_plus, std::uint64_t n_samples) {
  if (n_samples == 0) throw ConfigError("n_samples must be at least 1");
  BornEstimate e;
  e.n_samples = n_samples;
  e.n_plus = n_plus;
  e.frequency_plus = static_cast<double>(n_plus) / static_cast<double>(n_samples);
  e.standard_error =
      std::sqrt(e.frequency_plus * (1.0 - e.frequency_plus) / static_cast<double>(n_samples));
  e.lower = std::max(0.0, e.frequency_plus - 3.0 * e.standard_error);
  e.upper = std::min(1.0, e.frequency_plus + 3.0 * e.standard_error);
  return e;
}

struct EnsembleOptions {
  std::uint64_t n_samples = 100000;
  std::uint64_t seed = 42;
  unsigned workers = 1;
  double dead_zone = 0.5;
  std::size_t bins = 80;
  double hist_lo = -2.0;
  double hist_hi = 2.0;
  OutcomeRule rule = OutcomeRule::BranchShare;
};

inline constexpr std::size_t kRecordBlock = 1024;

struct PhysicalEnsemble {
  BornEstimate born;
  Histogram all;          // Y of every record
  Histogram plus;         // records with outcome Plus
  Histogram minus;
  std::uint64_t omega_plus = 0;
  std::uint64_t omega_minus = 0;
  std::uint64_t unclassified = 0;
  std::uint64_t sign_disagreements = 0;  // outcome differs from sign(Y), Y != 0
  double mean_y = 0.0;
};

// n_samples independent measurements on substreams (seed, physical, index).
inline PhysicalEnsemble run_physical_ensemble(const ModelParams& params, const QubitState& psi,
                                              const EnsembleOptions& opt) {
  if (opt.n_samples == 0) throw ConfigError("n_samples must be at least 1");
  const Histogram proto = Histogram::uniform(opt.hist_lo, opt.hist_hi, opt.bins);
  struct Partial {
    Histogram all, plus, minus;
    std::uint64_t n_plus = 0, omega_plus = 0, omega_minus = 0, unclassified = 0, disagree = 0;
    numeric::CompensatedSum sum_y;
  };
  auto partials = map_blocks<Partial>(
      opt.n_samples, kRecordBlock, opt.workers, [&](std::size_t begin, std::size_t end) {
        Partial p;
        p.all = p.plus = p.minus = proto;
        for (std::size_t i = begin; i < end; ++i) {
          SubstreamRng rng(opt.seed, stream_domain::kPhysical, i);
          const MeasurementRecord r = run_measurement(rng, params, psi, opt.dead_zone, opt.rule);
          p.all.add(r.y);
          if (r.outcome == Outcome::Plus) {
            ++p.n_plus;
            p.plus.add(r.y);
          } else {
            p.minus.add(r.y);
          }
          switch (r.subensemble) {
            case Subensemble::OmegaPlus: ++p.omega_plus; break;
            case Subensemble::OmegaMinus: ++p.omega_minus; break;
            default: ++p.unclassified; break;
          }
          if (r.z != 0 && (r.z > 0) != (r.outcome == Outcome::Plus)) ++p.disagree;
          p.sum_y += r.y;
        }
        return p;
      });

  PhysicalEnsemble out;
  out.all = out.plus = out.minus = proto;
  std::uint64_t n_plus = 0;
  numeric::CompensatedSum sum_y;
  for (const Partial& p : partials) {
    out.all.merge(p.all);
    out.plus.merge(p.plus);
    out.minus.merge(p.minus);
    n_plus += p.n_plus;
    out.omega_plus += p.omega_plus;
    out.omega_minus += p.omega_minus;
    out.unclassified += p.unclassified;
    out.sign_disagreements += p.disagree;
    sum_y.merge(p.sum_y);
  }
  out.born = make_born_estimate(n_plus, opt.n_samples);
  out.mean_y = sum_y.value() / static_cast<double>(opt.n_samples);
  return out;
}

inline BornEstimate estimate_born(std::uint64_t seed, const ModelParams& params,
                                  const QubitState& psi, std::uint64_t n_samples,
                                  unsigned workers = 1) {
  EnsembleOptions opt;
  opt.seed = seed;
  opt.n_samples = n_samples;
  opt.workers = workers;
  return run_physical_ensemble(params, psi, opt).born;
}

// Y histogram of the uniform (prior) ensemble on substreams (seed, uniform, index).
inline Histogram run_uniform_histogram(const ModelParams& params, const EnsembleOptions& opt) {
  if (opt.n_samples == 0) throw ConfigError("n_samples must be at least 1");
  const Histogram proto = Histogram::uniform(opt.hist_lo, opt.hist_hi, opt.bins);
  const double scale = params.n_steps() * params.kappa();
  auto partials = map_blocks<Histogram>(
      opt.n_samples, kRecordBlock, opt.workers, [&](std::size_t begin, std::size_t end) {
        Histogram h = proto;
        for (std::size_t i = begin; i < end; ++i) {
          SubstreamRng rng(opt.seed, stream_domain::kUniform, i);
          h.add(static_cast<double>(sample_uniform_z(rng, params)) / scale);
        }
        return h;
      });
  Histogram out = proto;
  for (const Histogram& h : partials) out.merge(h);
  return out;
}

}  // namespace bornsim
