#include <bornsim/analytic.hpp>
#include <bornsim/sampler.hpp>

#include "support/brute_force.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace bornsim;
using Catch::Approx;

namespace {
const QubitState kFigurePsi = QubitState::from_probability(0.6);
const ModelParams kFigureParams(0.1, 2000);  // Xi = 20

const PhysicalEnsemble& figure_ensemble() {
  static const PhysicalEnsemble e = [] {
    EnsembleOptions opt;
    opt.n_samples = 100000;
    opt.seed = 42;
    return run_physical_ensemble(kFigureParams, kFigurePsi, opt);
  }();
  return e;
}
}  // namespace

TEST_CASE("physical step probabilities are w_{n+1}(s) / 2 w_n", "[sampler][property]") {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 5000; ++t) {
    const double kappa = 0.001 + 0.98 * u(gen);
    const double wp = u(gen);
    const int n = static_cast<int>(gen() % 3000);
    const int k = static_cast<int>(gen() % (n + 1));  // +1 steps so far
    const double lbp = k * std::log1p(kappa) + (n - k) * std::log1p(-kappa);
    const double lbm = k * std::log1p(-kappa) + (n - k) * std::log1p(kappa);
    const double a = std::log(wp) + lbp, b = std::log1p(-wp) + lbm;
    const double lw = numeric::log_sum_exp(a, b);
    const double lw_up = numeric::log_sum_exp(a + std::log1p(kappa), b + std::log1p(-kappa));
    const double lw_down = numeric::log_sum_exp(a + std::log1p(-kappa), b + std::log1p(kappa));
    const StepProbabilities p = physical_step_probabilities(a - b, kappa);
    CHECK(std::abs(p.plus + p.minus - 1.0) < 1e-12);
    CHECK(std::abs(std::exp(lw_up - lw) + std::exp(lw_down - lw) - 2.0) < 1e-12);
    CHECK(p.plus == Approx(0.5 * std::exp(lw_up - lw)).epsilon(1e-11));
    CHECK(p.minus == Approx(0.5 * std::exp(lw_down - lw)).epsilon(1e-11));
  }
  const auto sat = physical_step_probabilities(numeric::kNegInf, 0.2);
  CHECK(sat.plus == Approx(0.4));
}

TEST_CASE("uniform configurations are unbiased and independent", "[sampler]") {
  const ModelParams p(0.1, 8);
  const int draws = 100000;
  std::vector<double> mean(8, 0.0);
  double corr01 = 0.0, corr37 = 0.0;
  for (int i = 0; i < draws; ++i) {
    SubstreamRng rng(5, stream_domain::kUniform, static_cast<std::uint64_t>(i));
    const EpsilonConfig c = sample_uniform_config(rng, p);
    for (int n = 0; n < 8; ++n) mean[n] += c[n];
    corr01 += c[0] * c[1];
    corr37 += c[3] * c[7];
  }
  for (double m : mean) CHECK(std::abs(m / draws) < 0.01);
  CHECK(std::abs(corr01 / draws) < 0.01);
  CHECK(std::abs(corr37 / draws) < 0.01);

  // The fast Z path consumes the same bits as the full configuration.
  const ModelParams big(0.1, 150);
  for (std::uint64_t i = 0; i < 50; ++i) {
    SubstreamRng a(1, 2, i), b(1, 2, i);
    CHECK(sample_uniform_z(a, big) == z_sum(sample_uniform_config(b, big)));
  }
}

TEST_CASE("uniform Y histogram follows q(Y)", "[sampler]") {
  EnsembleOptions opt;
  opt.n_samples = 100000;
  opt.seed = 7;
  const Histogram h = run_uniform_histogram(kFigureParams, opt);
  const auto masses =
      lattice_bin_masses(h, kFigureParams, [](double y) { return q_density(y, 20.0); });
  const BinDeviation d = poisson_deviation(h, masses, static_cast<double>(opt.n_samples), 4.0);
  INFO("worst bin " << d.worst_bin << " at " << d.max_sigma << " sigma");
  CHECK(d.bins_over == 0);
  CHECK(h.total() + h.underflow() + h.overflow() == opt.n_samples);
}

TEST_CASE("physical sampler with a single branch is an i.i.d. biased coin", "[sampler]") {
  const ModelParams p(0.2, 50);
  const QubitState up(1.0, 0.0);
  long plus = 0, total = 0;
  for (std::uint64_t i = 0; i < 4000; ++i) {
    SubstreamRng rng(3, stream_domain::kPhysical, i);
    const EpsilonConfig c = sample_physical_config(rng, p, up);
    for (auto s : c.steps()) {
      plus += s == 1;
      ++total;
    }
  }
  const double f = static_cast<double>(plus) / total;
  CHECK(std::abs(f - 0.6) < 4 * std::sqrt(0.24 / total));
}

TEST_CASE("run_measurement fills consistent records", "[sampler]") {
  for (std::uint64_t i = 0; i < 200; ++i) {
    SubstreamRng rng(9, stream_domain::kPhysical, i);
    const MeasurementRecord r = run_measurement(rng, kFigureParams, kFigurePsi, 0.5);
    CHECK(r.y == Approx(r.z / 200.0).epsilon(1e-15));
    CHECK(r.subensemble == classify_subensemble(r, 0.5));
    CHECK(r.log_total_rate ==
          Approx(numeric::log_sum_exp(std::log(0.6) + r.log_rate_plus,
                                      std::log(0.4) + r.log_rate_minus))
              .margin(1e-12));
    CHECK(r.log_rate_plus + r.log_rate_minus == Approx(2000 * std::log1p(-0.01)).epsilon(1e-12));
  }

  const QubitState up(1.0, 0.0);
  for (std::uint64_t i = 0; i < 200; ++i) {
    SubstreamRng rng(10, stream_domain::kPhysical, i);
    CHECK(run_measurement(rng, kFigureParams, up).outcome == Outcome::Plus);
  }
}

TEST_CASE("classify_subensemble", "[sampler]") {
  MeasurementRecord r;
  r.y = 1.0;
  CHECK(classify_subensemble(r, 0.5) == Subensemble::OmegaPlus);
  r.y = -0.7;
  CHECK(classify_subensemble(r, 0.5) == Subensemble::OmegaMinus);
  r.y = 0.0;
  CHECK(classify_subensemble(r, 0.5) == Subensemble::Unclassified);
  CHECK(classify_subensemble(r, 1e-9) == Subensemble::Unclassified);
  r.y = 0.49;
  CHECK(classify_subensemble(r, 0.5) == Subensemble::Unclassified);
  CHECK_THROWS_AS(classify_subensemble(r, 1.0), ConfigError);
}

TEST_CASE("Born frequency at the figure parameters", "[sampler]") {
  const PhysicalEnsemble& e = figure_ensemble();
  CHECK(e.born.n_samples == 100000);
  CHECK(std::abs(e.born.frequency_plus - 0.6) < 0.005);
  CHECK(e.born.covers(0.6));
  CHECK(e.born.standard_error ==
        Approx(std::sqrt(e.born.frequency_plus * (1 - e.born.frequency_plus) / 1e5)));
  CHECK(e.born.lower <= 0.6);
  CHECK(e.born.upper >= 0.6);
}

TEST_CASE("mean Y under the physical measure is |psi+|^2 - |psi-|^2", "[sampler]") {
  // Var Y = 1/Xi + 1 - 0.2^2 for the two-Gaussian mixture.
  const double sigma = std::sqrt((0.05 + 1.0 - 0.04) / 1e5);
  CHECK(std::abs(figure_ensemble().mean_y - 0.2) < 3 * sigma);
}

TEST_CASE("physical Y histograms follow Q(Y) and the shifted peaks", "[sampler]") {
  const PhysicalEnsemble& e = figure_ensemble();
  const double n = 1e5;
  const auto q_all = lattice_bin_masses(e.all, kFigureParams,
                                        [](double y) { return final_density(y, 20.0, kFigurePsi); });
  const BinDeviation all = poisson_deviation(e.all, q_all, n, 4.0);
  INFO("all: worst bin " << all.worst_bin << " at " << all.max_sigma << " sigma");
  CHECK(all.bins_over == 0);

  const auto q_plus = lattice_bin_masses(e.plus, kFigureParams,
                                         [](double y) { return q_density(y - 1.0, 20.0); });
  const BinDeviation plus =
      poisson_deviation(e.plus, q_plus, static_cast<double>(e.born.n_plus), 4.0);
  INFO("plus: worst bin " << plus.worst_bin << " at " << plus.max_sigma << " sigma");
  CHECK(plus.bins_over == 0);

  const auto q_minus = lattice_bin_masses(e.minus, kFigureParams,
                                          [](double y) { return q_density(y + 1.0, 20.0); });
  const BinDeviation minus = poisson_deviation(
      e.minus, q_minus, static_cast<double>(e.born.n_samples - e.born.n_plus), 4.0);
  CHECK(minus.bins_over == 0);
}

TEST_CASE("unclassified fraction matches the exact dead-zone mass", "[sampler]") {
  const PhysicalEnsemble& e = figure_ensemble();
  // Exact physical law of Z: |Y| < 0.5 <=> |Z| < 100.
  long double exact = 0.0L;
  for (int k = 0; k <= 2000; ++k) {
    if (std::abs(2 * k - 2000) < 100) exact += testing::physical_z_probability(2000, k, 0.1L, 0.6L);
  }
  const double p = static_cast<double>(exact);
  const double f = static_cast<double>(e.unclassified) / 1e5;
  CHECK(std::abs(f - p) < 4 * std::sqrt(p * (1 - p) / 1e5));
  // The continuum estimate is close but not identical on the discrete lattice.
  CHECK(p == Approx(separation_diagnostics(20.0, kFigurePsi, 0.5).unclassified_mass).epsilon(0.15));
  CHECK(e.omega_plus + e.omega_minus + e.unclassified == 100000);
}

TEST_CASE("branch-share outcomes agree with sign(Y) outside the mid-zone", "[sampler]") {
  const PhysicalEnsemble& e = figure_ensemble();
  CHECK(static_cast<double>(e.sign_disagreements) / 1e5 < 1e-3);

  EnsembleOptions opt;
  opt.n_samples = 20000;
  opt.rule = OutcomeRule::SignOfY;
  const PhysicalEnsemble s = run_physical_ensemble(kFigureParams, kFigurePsi, opt);
  CHECK(s.sign_disagreements == 0);
  CHECK(s.born.covers(0.6, 4.0));
}

TEST_CASE("estimate_born", "[sampler]") {
  const ModelParams p = ModelParams::from_xi(0.1, 20.0);
  const BornEstimate half = estimate_born(1, p, QubitState::from_probability(0.5), 20000);
  CHECK(half.covers(0.5));
  const BornEstimate one = estimate_born(1, p, QubitState(1.0, 0.0), 2000);
  CHECK(one.frequency_plus == 1.0);
  CHECK(one.standard_error == 0.0);
  CHECK_THROWS_AS(estimate_born(1, p, kFigurePsi, 0), ConfigError);
}

TEST_CASE("ensembles are bit-identical across worker counts", "[sampler]") {
  const ModelParams p(0.1, 400);
  EnsembleOptions opt;
  opt.n_samples = 5000;
  opt.seed = 123;
  opt.workers = 1;
  const PhysicalEnsemble a = run_physical_ensemble(p, kFigurePsi, opt);
  opt.workers = 8;
  const PhysicalEnsemble b = run_physical_ensemble(p, kFigurePsi, opt);
  CHECK(a.born.n_plus == b.born.n_plus);
  CHECK(a.mean_y == b.mean_y);
  CHECK(a.all.counts() == b.all.counts());
  CHECK(a.plus.counts() == b.plus.counts());
  opt.seed = 124;
  const PhysicalEnsemble c = run_physical_ensemble(p, kFigurePsi, opt);
  CHECK(a.all.counts() != c.all.counts());

  SubstreamRng r1(5, 2, 17), r2(5, 2, 17);
  CHECK(sample_physical_config(r1, p, kFigurePsi) == sample_physical_config(r2, p, kFigurePsi));
}

TEST_CASE("Histogram bookkeeping", "[sampler]") {
  Histogram h = Histogram::uniform(-2.0, 2.0, 80);
  CHECK(h.bins() == 80);
  CHECK(h.bin_index(-2.0) == 0);
  CHECK(h.bin_index(2.0) == 79);
  CHECK(h.bin_index(0.0) == 40);
  CHECK(h.bin_index(2.5) == -1);
  h.add(0.01);
  h.add(-3.0);
  h.add(7.0);
  CHECK(h.total() == 1);
  CHECK(h.underflow() == 1);
  CHECK(h.overflow() == 1);
  Histogram g = Histogram::uniform(-2.0, 2.0, 80);
  g.add(0.02);
  h.merge(g);
  CHECK(h.counts()[40] == 2);
  std::uint64_t sum = 0;
  for (auto c : h.counts()) sum += c;
  CHECK(sum == h.total());
  CHECK_THROWS_AS(h.merge(Histogram::uniform(-1.0, 1.0, 80)), ConfigError);
  CHECK_THROWS_AS(Histogram({0.0, 0.0}), ConfigError);
}
