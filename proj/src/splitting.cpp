#include "arratia/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace arratia {

namespace {

// x' = clamp(alpha x + beta, lo, hi) over a duration tau, solved piecewise in
// v = alpha x + beta: exponential inside (lo, hi), linear in x once clamped.
double clamped_affine_flow(double x, double tau, double alpha, double beta, double lo, double hi) {
  if (alpha == 0.0 || lo == hi) return x + std::clamp(beta, lo, hi) * tau;
  enum class Region { below, inside, above };
  double v = alpha * x + beta;
  Region r = v >= hi ? Region::above : v <= lo ? Region::below : Region::inside;
  for (int pass = 0; pass < 8 && tau > 0.0; ++pass) {
    if (r != Region::inside) {
      const double c = r == Region::above ? hi : lo;
      const double speed = alpha * c;  // dv/dt while clamped
      const bool toward_interior = r == Region::above ? speed < 0.0 : speed > 0.0;
      if (!toward_interior) return x + c * tau;
      const double reach = (c - v) / speed;
      if (reach >= tau) return x + c * tau;
      x = (c - beta) / alpha;
      v = c;
      tau -= reach;
      r = Region::inside;
      continue;
    }
    // v(s) = v e^{alpha s}; find the boundary it reaches, if any.
    double bound = std::numeric_limits<double>::quiet_NaN();
    if (alpha > 0.0) {
      if (v > 0.0) bound = hi;
      else if (v < 0.0) bound = lo;
    } else {
      if (v > 0.0 && lo > 0.0) bound = lo;
      else if (v < 0.0 && hi < 0.0) bound = hi;
    }
    double reach = std::numeric_limits<double>::infinity();
    if (!std::isnan(bound) && bound / v > 0.0) reach = std::max(std::log(bound / v) / alpha, 0.0);
    if (!(reach < tau)) return x + v * std::expm1(alpha * tau) / alpha;
    x = (bound - beta) / alpha;
    v = bound;
    tau -= reach;
    r = bound == hi ? Region::above : Region::below;
  }
  return x + std::clamp(v, lo, hi) * tau;
}

}  // namespace

double rk4_flow(double u, double s, double t, const DriftSpec& drift, std::size_t substeps) {
  if (t < s) throw std::invalid_argument(fmt::format("ode_flow: t = {} precedes s = {}", t, s));
  if (substeps < 1) throw std::invalid_argument("ode_flow: substeps must be at least 1");
  if (t == s) return u;
  const double h = (t - s) / static_cast<double>(substeps);
  double x = u;
  for (std::size_t i = 0; i < substeps; ++i) {
    const double k1 = drift(x);
    const double k2 = drift(x + 0.5 * h * k1);
    const double k3 = drift(x + 0.5 * h * k2);
    const double k4 = drift(x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

double ode_flow(double u, double s, double t, const DriftSpec& drift, std::size_t substeps) {
  if (t < s) throw std::invalid_argument(fmt::format("ode_flow: t = {} precedes s = {}", t, s));
  switch (drift.kind()) {
    case DriftSpec::Kind::zero:
      return u;
    case DriftSpec::Kind::constant:
      return u + drift.constant_value() * (t - s);
    case DriftSpec::Kind::affine_clamped:
      return clamped_affine_flow(u, t - s, drift.alpha(), drift.beta(), drift.lo(), drift.hi());
    case DriftSpec::Kind::tabulated:
      return rk4_flow(u, s, t, drift, substeps);
  }
  return u;
}

void SplitScheme::validate() const {
  if (ode_substeps < 1 || web_substeps < 1) throw std::invalid_argument("SplitScheme: substeps must be at least 1");
}

SampledPath solve_D(PathDriver& driver, double u, const DriftSpec& drift, const TimeGrid& fine_grid) {
  const auto knots = fine_grid.knots();
  SampledPath out{fine_grid, std::vector<double>(knots.size())};
  out.values[0] = u;
  const auto kind = drift.kind();
  if (kind == DriftSpec::Kind::zero || kind == DriftSpec::Kind::constant) {
    const double c = kind == DriftSpec::Kind::zero ? 0.0 : drift.constant_value();
    for (std::size_t i = 1; i < knots.size(); ++i) out.values[i] = u + c * knots[i] + driver.value(knots[i]);
    return out;
  }
  double x = u;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    x += drift(x) * (knots[i] - knots[i - 1]) + driver.increment(knots[i - 1], knots[i]);
    out.values[i] = x;
  }
  return out;
}

PairPath solve_S(PathDriver& driver, double u_y, double u_z, const SplitScheme& scheme, const TimeGrid& eval_grid) {
  scheme.validate();
  if (!eval_grid.refines(scheme.grid))
    throw std::invalid_argument("solve_S: evaluation grid must refine the scheme partition");
  const auto cells = scheme.grid.knots();
  const auto eval = eval_grid.knots();
  PairPath out{eval_grid, std::vector<double>(eval.size()), std::vector<double>(eval.size())};

  double integral = 0.0;  // drift integral of z through the current left knot
  std::size_t e = 0;
  for (std::size_t j = 0; j + 1 < cells.size(); ++j) {
    const double tj = cells[j], tn = cells[j + 1];
    const double zj = u_z + integral + driver.value(tj);
    const double z_end = ode_flow(zj, tj, tn, scheme.drift, scheme.ode_substeps);
    const double next_integral = integral + (z_end - zj);
    const bool last = j + 2 == cells.size();
    for (; e < eval.size() && (eval[e] < tn || (last && eval[e] == tn)); ++e) {
      out.z[e] = eval[e] == tn ? z_end : ode_flow(zj, tj, eval[e], scheme.drift, scheme.ode_substeps);
      out.y[e] = u_y + next_integral + driver.value(eval[e]);
    }
    integral = next_integral;
  }
  return out;
}

SplitRun run_split_flow(ParticleSystem system, const SplitScheme& scheme, std::span<PathDriver> drivers,
                        double t_end, const StepOptions& options) {
  scheme.validate();
  if (!(t_end > 0.0) || t_end > 1.0) throw std::invalid_argument("run_split_flow: t_end must lie in (0, 1]");
  const auto knots = scheme.grid.knots();
  const DriftSpec zero;
  for (std::size_t j = 0; j + 1 < knots.size() && system.clock() < t_end; ++j) {
    const double tj = knots[j], tn = knots[j + 1];
    if (scheme.drift.kind() != DriftSpec::Kind::zero)
      system.apply_map([&](double x) { return ode_flow(x, tj, tn, scheme.drift, scheme.ode_substeps); });
    for (std::size_t i = 1; i <= scheme.web_substeps; ++i) {
      const double t = std::min(sub_knot(tj, tn, i, scheme.web_substeps), t_end);
      if (t <= system.clock()) continue;
      system.advance(t, drivers, zero, options);
    }
  }
  auto j = system.scheme();
  return {std::move(system), std::move(j)};
}

SplitRun run_split_flow(std::vector<double> start_points, const SplitScheme& scheme, std::span<PathDriver> drivers,
                        double t_end, const StepOptions& options) {
  return run_split_flow(ParticleSystem(std::move(start_points)), scheme, drivers, t_end, options);
}

}  // namespace arratia
