#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace arratia {

/// Bounded Lipschitz drift a(x) with reported bounds C_a (Lipschitz) and
/// M_a (sup norm).
///
///   zero              a(x) = 0
///   constant          a(x) = c
///   affine_clamped    a(x) = clamp(alpha * x + beta, lo, hi)
///   tabulated         piecewise-linear through (xs[i], as[i]), constant
///                     extrapolation beyond the table
class DriftSpec {
 public:
  enum class Kind { zero, constant, affine_clamped, tabulated };

  DriftSpec() = default;
  static DriftSpec zero();
  static DriftSpec constant(double c);
  static DriftSpec affine_clamped(double alpha, double beta, double lo, double hi);
  static DriftSpec tabulated(std::vector<double> xs, std::vector<double> as);

  /// Parses the textual form produced by `describe()`:
  /// "zero", "constant:c", "affine:alpha,beta,lo,hi", "table:x0:a0;x1:a1;...".
  static DriftSpec parse(std::string_view text);
  std::string describe() const;

  double operator()(double x) const;

  Kind kind() const { return kind_; }
  double lipschitz_bound() const { return lipschitz_; }
  double sup_bound() const { return sup_; }

  double constant_value() const { return c_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  Kind kind_ = Kind::zero;
  double c_ = 0.0;
  double alpha_ = 0.0, beta_ = 0.0, lo_ = 0.0, hi_ = 0.0;
  std::vector<double> xs_, as_;
  double lipschitz_ = 0.0;
  double sup_ = 0.0;
};

/// Drift displacement over one step of length dt from x: exact for zero and
/// constant drift, one explicit Euler step otherwise.
double drift_increment(const DriftSpec& drift, double x, double dt);

}  // namespace arratia
