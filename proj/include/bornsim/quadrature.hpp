#pragma once

#include <bornsim/error.hpp>

#include <cmath>
#include <cstddef>

namespace bornsim::quadrature {

struct TrapezoidOptions {
  double max_step;             // initial panel width never exceeds this
  double rel_tol = 1e-14;      // stop when successive refinements agree
  double abs_tol = 1e-16;
  int max_refinements = 12;
};

// Trapezoid rule on [lo, hi] starting from the coarsest uniform grid with
// spacing <= max_step, halving the spacing until two successive estimates
// agree. Each refinement only evaluates the new midpoints. `Value` must
// support +, * by double and an abs() reachable via ADL or std.
template <typename Value, typename Fn>
Value integrate_trapezoid(Fn&& f, double lo, double hi, const TrapezoidOptions& opt) {
  if (!(hi > lo)) throw DomainError("integration interval must have hi > lo");
  if (!(opt.max_step > 0.0)) throw DomainError("max_step must be positive");

  std::size_t panels = static_cast<std::size_t>(std::ceil((hi - lo) / opt.max_step));
  if (panels < 2) panels = 2;
  double h = (hi - lo) / static_cast<double>(panels);

  Value sum = 0.5 * (f(lo) + f(hi));
  for (std::size_t i = 1; i < panels; ++i) sum = sum + f(lo + static_cast<double>(i) * h);
  Value estimate = h * sum;

  for (int level = 0; level < opt.max_refinements; ++level) {
    Value mids = f(lo + 0.5 * h);
    for (std::size_t i = 1; i < panels; ++i) {
      mids = mids + f(lo + (static_cast<double>(i) + 0.5) * h);
    }
    sum = sum + mids;
    panels *= 2;
    h *= 0.5;
    const Value refined = h * sum;
    using std::abs;
    const double change = abs(refined - estimate);
    estimate = refined;
    if (change <= opt.abs_tol + opt.rel_tol * abs(refined)) break;
  }
  return estimate;
}

}  // namespace bornsim::quadrature
