#pragma once

#include <span>
#include <vector>

#include "arratia/drift.hpp"
#include "arratia/driver.hpp"
#include "arratia/flow.hpp"

namespace arratia {

/// Position at time t of the drift ODE x' = a(x) started from u at time s.
/// Closed form for zero, constant and clamped-affine drift; classical RK4 with
/// `substeps` equal steps for tabulated drift.
double ode_flow(double u, double s, double t, const DriftSpec& drift, std::size_t substeps = 8);

/// RK4 integration of the drift ODE regardless of drift kind.
double rk4_flow(double u, double s, double t, const DriftSpec& drift, std::size_t substeps);

struct SplitScheme {
  TimeGrid grid;                 // drift / web alternation partition
  DriftSpec drift;
  std::size_t ode_substeps = 8;  // RK4 steps per cell when no closed form exists
  std::size_t web_substeps = 1;  // coalescing substeps per cell

  void validate() const;
};

/// Values of a path at the knots of `grid`.
struct SampledPath {
  TimeGrid grid;
  std::vector<double> values;
};

/// Euler-Maruyama solution of dx = a(x) dt + dw from u on `fine_grid`
/// (exact for zero and constant drift).
SampledPath solve_D(PathDriver& driver, double u, const DriftSpec& drift, const TimeGrid& fine_grid);

/// Single-path splitting pair. On cell j = [t_j, t_{j+1}):
///   z(t) = ODE flow over [t_j, t] from z(t_j), where z jumps at t_j by the
///          Brownian increment of the previous cell;
///   y(t) = u_y + (drift integral of z through t_{j+1}) + w(t).
/// Both are sampled on `eval_grid`, which must refine scheme.grid. At the final
/// knot the left limit is reported.
struct PairPath {
  TimeGrid grid;
  std::vector<double> y;
  std::vector<double> z;
};

PairPath solve_S(PathDriver& driver, double u_y, double u_z, const SplitScheme& scheme, const TimeGrid& eval_grid);
inline PairPath solve_S(PathDriver& driver, double u, const SplitScheme& scheme, const TimeGrid& eval_grid) {
  return solve_S(driver, u, u, scheme, eval_grid);
}

struct SplitRun {
  ParticleSystem system;
  CoalescenceScheme scheme;
};

/// Composed scheme: on every cell the drift ODE moves each cluster over the
/// whole cell, then a driftless coalescing segment runs across the cell with
/// web_substeps steps. Order violations caused by the ODE step are merged as
/// numerical events. Stops at t_end; a partial last cell still applies the
/// ODE over the full cell first.
SplitRun run_split_flow(ParticleSystem system, const SplitScheme& scheme, std::span<PathDriver> drivers,
                        double t_end = 1.0, const StepOptions& options = {});
SplitRun run_split_flow(std::vector<double> start_points, const SplitScheme& scheme, std::span<PathDriver> drivers,
                        double t_end = 1.0, const StepOptions& options = {});

}  // namespace arratia
