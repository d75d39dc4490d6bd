#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace bornsim::numeric {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) without overflow. Either argument may be -inf.
inline double log_sum_exp(double a, double b) {
  const double hi = std::max(a, b);
  if (hi == kNegInf) return kNegInf;
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// 1 / (1 + exp(-x)), saturating cleanly at +-inf.
inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log of a squared modulus; 0 maps to -inf.
inline double log_norm_sq(double modulus) {
  return modulus == 0.0 ? kNegInf : 2.0 * std::log(modulus);
}

// Neumaier's variant of Kahan summation. Deterministic for a fixed input order.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }

  // Folds another partial in; keeps both compensation terms.
  void merge(const CompensatedSum& other) {
    add(other.sum_);
    add(other.comp_);
  }

  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace bornsim::numeric
