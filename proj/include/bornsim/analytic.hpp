#pragma once

// Continuous-Y layer: the Gaussian ensemble density q(Y), the rate function
// w(Y), the final-state density Q(Y) = q(Y) w(Y), and the configuration
// conditioned density matrix rho(Y, Phi) with its limits and ensemble mean.

#include <bornsim/error.hpp>
#include <bornsim/model.hpp>
#include <bornsim/numeric.hpp>
#include <bornsim/quadrature.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

namespace bornsim {

class DensityMatrix2 {
 public:
  static constexpr double kTraceTolerance = 1e-12;
  static constexpr double kPsdTolerance = 1e-12;

  // rho_-+ is conj(rho_+-) by construction.
  DensityMatrix2(double rho_pp, std::complex<double> rho_pm, double rho_mm)
      : pp_(rho_pp), pm_(rho_pm), mm_(rho_mm) {
    if (std::abs(trace() - 1.0) > kTraceTolerance) {
      throw DomainError("density matrix trace deviates from 1: " + std::to_string(trace()));
    }
    if (pp_ < 0.0 || mm_ < 0.0 || determinant() < -kPsdTolerance) {
      throw DomainError("density matrix is not positive semidefinite");
    }
  }

  static DensityMatrix2 projector(Outcome o) {
    return o == Outcome::Plus ? DensityMatrix2(1.0, 0.0, 0.0) : DensityMatrix2(0.0, 0.0, 1.0);
  }

  double pp() const { return pp_; }
  std::complex<double> pm() const { return pm_; }
  std::complex<double> mp() const { return std::conj(pm_); }
  double mm() const { return mm_; }

  double trace() const { return pp_ + mm_; }
  double determinant() const { return pp_ * mm_ - std::norm(pm_); }
  // Tr(rho^2)
  double purity() const { return pp_ * pp_ + mm_ * mm_ + 2.0 * std::norm(pm_); }

  // Largest entrywise modulus of (this - other).
  double max_abs_diff(const DensityMatrix2& other) const {
    return std::max({std::abs(pp_ - other.pp_), std::abs(mm_ - other.mm_),
                     std::abs(pm_ - other.pm_)});
  }

 private:
  double pp_;
  std::complex<double> pm_;
  double mm_;
};

namespace detail {
inline void require_positive_xi(double xi) {
  if (!(xi > 0.0)) throw DomainError("xi must be positive, got " + std::to_string(xi));
}
}  // namespace detail

// q(Y) = sqrt(Xi / 2pi) exp(-Xi Y^2 / 2)
inline double q_density(double y, double xi) {
  detail::require_positive_xi(xi);
  return std::sqrt(xi / (2.0 * std::numbers::pi)) * std::exp(-0.5 * xi * y * y);
}

// ln w(Y), w(Y) = |psi+|^2 e^{Xi(Y - 1/2)} + |psi-|^2 e^{Xi(-Y - 1/2)}
inline double rate_function(double y, double xi, const QubitState& psi) {
  detail::require_positive_xi(xi);
  return numeric::log_sum_exp(psi.log_weight(Outcome::Plus) + xi * (y - 0.5),
                              psi.log_weight(Outcome::Minus) + xi * (-y - 0.5));
}

// Q(Y) = |psi+|^2 q(Y - 1) + |psi-|^2 q(Y + 1)
inline double final_density(double y, double xi, const QubitState& psi) {
  return psi.weight(Outcome::Plus) * q_density(y - 1.0, xi) +
         psi.weight(Outcome::Minus) * q_density(y + 1.0, xi);
}

// rho(Y, Phi) normalized in log space. |rho_+-| = sqrt(rho_++ rho_--) holds
// exactly for this rank-one matrix, which is how the coherence is evaluated.
inline DensityMatrix2 density_matrix(double y, double phi, double xi, const QubitState& psi) {
  detail::require_positive_xi(xi);
  const double a = psi.log_weight(Outcome::Plus) + xi * y;
  const double b = psi.log_weight(Outcome::Minus) - xi * y;
  const double norm = numeric::log_sum_exp(a, b);
  const double pp = std::exp(a - norm);
  const double mm = std::exp(b - norm);
  std::complex<double> pm = 0.0;
  if (a != numeric::kNegInf && b != numeric::kNegInf) {
    const double phase = std::arg(psi.psi_plus()) - std::arg(psi.psi_minus()) + phi;
    pm = std::polar(std::exp(0.5 * (a + b) - norm), phase);
  }
  // pp + mm can land one ulp off 1; fold the residue into the larger entry.
  const double excess = (pp + mm) - 1.0;
  return pp >= mm ? DensityMatrix2(pp - excess, pm, mm) : DensityMatrix2(pp, pm, mm - excess);
}

// Large-Xi limits rho(+1, Phi) = diag(1, 0), rho(-1, Phi) = diag(0, 1).
inline DensityMatrix2 limit_density_matrix(Outcome o) { return DensityMatrix2::projector(o); }

struct YRange {
  double lo;
  double hi;
};

// [-1 - 8/sqrt(Xi), 1 + 8/sqrt(Xi)]: both peaks plus eight standard deviations.
inline YRange integration_range(double xi) {
  detail::require_positive_xi(xi);
  const double pad = 8.0 / std::sqrt(xi);
  return {-1.0 - pad, 1.0 + pad};
}

inline quadrature::TrapezoidOptions default_quadrature(double xi) {
  return {.max_step = 1.0 / (20.0 * std::sqrt(xi))};
}

// Integral of Q(Y) rho(Y, Phi). The diagonal tends to (|psi+|^2, |psi-|^2);
// at finite Xi the coherence is psi+ psi-^* e^{i Phi} e^{-Xi/2}.
inline DensityMatrix2 mean_final_density_matrix(double xi, double phi, const QubitState& psi) {
  const YRange range = integration_range(xi);
  const auto opt = default_quadrature(xi);
  const double pp = quadrature::integrate_trapezoid<double>(
      [&](double y) { return final_density(y, xi, psi) * density_matrix(y, phi, xi, psi).pp(); },
      range.lo, range.hi, opt);
  const double mm = quadrature::integrate_trapezoid<double>(
      [&](double y) { return final_density(y, xi, psi) * density_matrix(y, phi, xi, psi).mm(); },
      range.lo, range.hi, opt);
  const std::complex<double> pm = quadrature::integrate_trapezoid<std::complex<double>>(
      [&](double y) { return final_density(y, xi, psi) * density_matrix(y, phi, xi, psi).pm(); },
      range.lo, range.hi, opt);
  return DensityMatrix2(pp, pm, mm);
}

// Closed form of the mean coherence, psi+ psi-^* e^{i Phi} e^{-Xi/2}.
inline std::complex<double> mean_coherence_closed_form(double xi, double phi,
                                                       const QubitState& psi) {
  return psi.psi_plus() * std::conj(psi.psi_minus()) * std::polar(std::exp(-0.5 * xi), phi);
}

struct SeparationReport {
  double unclassified_mass;   // integral of Q over |Y| < dead_zone
  double cross_mass_plus;     // mass of the |psi+|^2 q(Y-1) peak at Y < 0
  double cross_mass_minus;    // mass of the |psi-|^2 q(Y+1) peak at Y > 0
  double peak_mass_plus;      // integral of |psi+|^2 q(Y-1) over the integration range
  double peak_mass_minus;
  double half_line_mass_plus;   // integral of Q over Y > 0
  double half_line_mass_minus;  // integral of Q over Y < 0
};

inline SeparationReport separation_diagnostics(double xi, const QubitState& psi,
                                               double dead_zone) {
  detail::require_positive_xi(xi);
  if (!(dead_zone >= 0.0 && dead_zone < 1.0)) throw DomainError("dead_zone must lie in [0, 1)");
  const YRange range = integration_range(xi);
  const auto opt = default_quadrature(xi);
  const double wp = psi.weight(Outcome::Plus);
  const double wm = psi.weight(Outcome::Minus);
  auto plus_peak = [&](double y) { return wp * q_density(y - 1.0, xi); };
  auto minus_peak = [&](double y) { return wm * q_density(y + 1.0, xi); };
  auto both = [&](double y) { return final_density(y, xi, psi); };
  auto integrate = [&](auto&& f, double lo, double hi) {
    return hi > lo ? quadrature::integrate_trapezoid<double>(f, lo, hi, opt) : 0.0;
  };

  SeparationReport r{};
  r.unclassified_mass = integrate(both, -dead_zone, dead_zone);
  r.cross_mass_plus = integrate(plus_peak, range.lo, 0.0);
  r.cross_mass_minus = integrate(minus_peak, 0.0, range.hi);
  r.peak_mass_plus = integrate(plus_peak, range.lo, range.hi);
  r.peak_mass_minus = integrate(minus_peak, range.lo, range.hi);
  r.half_line_mass_plus = integrate(both, 0.0, range.hi);
  r.half_line_mass_minus = integrate(both, range.lo, 0.0);
  return r;
}

class DistributionCurve {
 public:
  DistributionCurve(std::vector<double> grid, std::vector<double> values, double xi)
      : grid_(std::move(grid)), values_(std::move(values)), xi_(xi) {
    if (grid_.size() != values_.size() || grid_.size() < 2) {
      throw ConfigError("curve needs matching grid and values with at least two points");
    }
    for (std::size_t i = 1; i < grid_.size(); ++i) {
      if (!(grid_[i] > grid_[i - 1])) throw ConfigError("curve grid must be strictly increasing");
    }
    for (double v : values_) {
      if (!(v >= 0.0)) throw ConfigError("curve densities must be nonnegative");
    }
  }

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double xi() const { return xi_; }

  double trapezoid_integral() const {
    double s = 0.0;
    for (std::size_t i = 1; i < grid_.size(); ++i) {
      s += 0.5 * (values_[i] + values_[i - 1]) * (grid_[i] - grid_[i - 1]);
    }
    return s;
  }

  // Interior strict local maxima, as grid indices.
  std::vector<std::size_t> local_maxima() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i + 1 < values_.size(); ++i) {
      if (values_[i] > values_[i - 1] && values_[i] >= values_[i + 1]) out.push_back(i);
    }
    return out;
  }

 private:
  std::vector<double> grid_;
  std::vector<double> values_;
  double xi_;
};

// Uniform grid lo, lo + step, ..., computed as lo + i*step to avoid drift.
inline std::vector<double> uniform_grid(double lo, double hi, std::size_t n_points) {
  if (n_points < 2 || !(hi > lo)) throw ConfigError("grid needs hi > lo and >= 2 points");
  std::vector<double> g(n_points);
  const double step = (hi - lo) / static_cast<double>(n_points - 1);
  for (std::size_t i = 0; i < n_points; ++i) g[i] = lo + static_cast<double>(i) * step;
  g.back() = hi;
  return g;
}

inline DistributionCurve initial_curve(double xi, std::vector<double> grid) {
  std::vector<double> v(grid.size());
  std::transform(grid.begin(), grid.end(), v.begin(), [&](double y) { return q_density(y, xi); });
  return {std::move(grid), std::move(v), xi};
}

inline DistributionCurve final_curve(double xi, const QubitState& psi, std::vector<double> grid) {
  std::vector<double> v(grid.size());
  std::transform(grid.begin(), grid.end(), v.begin(),
                 [&](double y) { return final_density(y, xi, psi); });
  return {std::move(grid), std::move(v), xi};
}

// Locates a local maximum of Q(Y) by golden-section search on [lo, hi].
inline double refine_maximum(double xi, const QubitState& psi, double lo, double hi) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  for (int it = 0; it < 200 && (b - a) > 1e-12; ++it) {
    if (final_density(c, xi, psi) > final_density(d, xi, psi)) {
      b = d;
    } else {
      a = c;
    }
    c = b - inv_phi * (b - a);
    d = a + inv_phi * (b - a);
  }
  return 0.5 * (a + b);
}

// Positions of the local maxima of Q(Y) on [lo, hi], refined from a grid scan.
inline std::vector<double> final_density_peaks(double xi, const QubitState& psi, double lo = -2.0,
                                               double hi = 2.0, std::size_t n_points = 4001) {
  const DistributionCurve curve = final_curve(xi, psi, uniform_grid(lo, hi, n_points));
  std::vector<double> peaks;
  const auto& g = curve.grid();
  for (std::size_t i : curve.local_maxima()) {
    peaks.push_back(refine_maximum(xi, psi, g[i - 1], g[i + 1]));
  }
  return peaks;
}

}  // namespace bornsim
