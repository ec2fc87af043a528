#include "arratia/stats.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace arratia {

void Accumulator::add(double x) {
  ++count;
  const double d = x - mean;
  mean += d / static_cast<double>(count);
  m2 += d * (x - mean);
}

void Accumulator::merge(const Accumulator& o) {
  if (o.count == 0) return;
  if (count == 0) {
    *this = o;
    return;
  }
  const double n = static_cast<double>(count + o.count);
  const double d = o.mean - mean;
  mean += d * static_cast<double>(o.count) / n;
  m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) / n;
  count += o.count;
}

double Accumulator::variance() const { return count < 2 ? 0.0 : m2 / static_cast<double>(count - 1); }

double Accumulator::std_error() const {
  return count < 2 ? 0.0 : std::sqrt(variance() / static_cast<double>(count));
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal_distribution<double>{}, p); }

double student_t_quantile(double p, double dof) {
  return boost::math::quantile(boost::math::students_t_distribution<double>{dof}, p);
}

double chi_squared_quantile(double p, double dof) {
  return boost::math::quantile(boost::math::chi_squared_distribution<double>{dof}, p);
}

namespace {

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("fit: x and y differ in length");
  if (a < 2) throw std::invalid_argument("fit: need at least two points");
}

LinearFit weighted(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0)) throw std::invalid_argument("fit: x values must not all coincide");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    f.rss += w[i] * r * r;
  }
  f.slope_std_error = 1.0 / std::sqrt(sxx);  // known-variance form; rescaled by the caller for OLS
  return f;
}

}  // namespace

LinearFit ols(std::span<const double> x, std::span<const double> y) {
  check_sizes(x.size(), y.size());
  const std::vector<double> w(x.size(), 1.0);
  LinearFit f = weighted(x, y, w);
  const std::size_t n = x.size();
  if (n == 2) {
    f.slope_std_error = 0.0;
    f.slope_ci_low = f.slope_ci_high = f.slope;
    return f;
  }
  const double dof = static_cast<double>(n - 2);
  f.slope_std_error *= std::sqrt(f.rss / dof);
  const double q = student_t_quantile(0.975, dof);
  f.slope_ci_low = f.slope - q * f.slope_std_error;
  f.slope_ci_high = f.slope + q * f.slope_std_error;
  return f;
}

LinearFit wls(std::span<const double> x, std::span<const double> y, std::span<const double> y_std_error) {
  check_sizes(x.size(), y.size());
  if (y_std_error.size() != y.size()) throw std::invalid_argument("fit: one standard error per point required");
  std::vector<double> w(x.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(y_std_error[i] > 0)) throw std::invalid_argument("wls: standard errors must be positive");
    w[i] = 1.0 / (y_std_error[i] * y_std_error[i]);
  }
  LinearFit f = weighted(x, y, w);
  const double q = normal_quantile(0.975);
  f.slope_ci_low = f.slope - q * f.slope_std_error;
  f.slope_ci_high = f.slope + q * f.slope_std_error;
  return f;
}

LinearFit loglog_fit(std::span<const double> levels, std::span<const double> estimates,
                     std::span<const double> std_errors) {
  check_sizes(levels.size(), estimates.size());
  std::vector<double> lx, ly, se;
  bool weighted_ok = std_errors.size() == estimates.size();
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > 0) || !(estimates[i] > 0))
      throw std::invalid_argument("loglog_fit: levels and estimates must be positive");
    lx.push_back(std::log(levels[i]));
    ly.push_back(std::log(estimates[i]));
    if (weighted_ok) {
      if (!(std_errors[i] > 0)) weighted_ok = false;
      else se.push_back(std_errors[i] / estimates[i]);
    }
  }
  return weighted_ok ? wls(lx, ly, se) : ols(lx, ly);
}

}  // namespace arratia
