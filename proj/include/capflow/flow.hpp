#pragma once

#include "capflow/cap.hpp"
#include "capflow/errors.hpp"
#include "capflow/grid.hpp"
#include "capflow/surface.hpp"
#include "capflow/trajectory.hpp"

#include <functional>
#include <string>
#include <vector>

namespace capflow {

enum class FlowMode { mct, mcf };
enum class Scheme { explicit_euler, imex };

const char* to_string(FlowMode m);
const char* to_string(Scheme s);
FlowMode parse_flow_mode(const std::string& s);
Scheme parse_scheme(const std::string& s);

struct FlowConfig {
  FlowMode mode = FlowMode::mct;
  double theta = 0.5 * 3.14159265358979323846;
  HemisphereGrid grid;
  double dt_safety = 0.5;
  double t_max = 50.0;
  double stop_tol = 1e-6;
  int monitor_every = 1;
  Scheme scheme = Scheme::explicit_euler;
  double imex_factor = 50.0;  // imex dt as a multiple of the explicit dt, at most 50
  double dt_fixed = 0.0;      // > 0 overrides the CFL step
  long max_steps = 0;         // 0 for no limit
  long checkpoint_every = 0;

  int n() const { return grid.n; }
  void validate() const;
};

// FNV-1a over the fields that shape the trajectory
std::string config_hash(const FlowConfig& cfg);

struct Diagnostics {
  double maxF = 0.0;
  double kappa_min = 0.0;
  double xe_nu_min = 0.0;
  std::vector<double> W;
};

struct FlowState {
  GraphState graph;
  long step_index = 0;
  double dt_last = 0.0;
  Diagnostics diag;
};

class NotConverged : public Error {
 public:
  NotConverged(const std::string& what, TrajectoryRecord record)
      : Error(what), trajectory(std::move(record)) {}
  TrajectoryRecord trajectory;
};

// root of p = -cos(theta) sqrt(1 + p^2 + q^2), q = |tangential gradient| on the equator
double oblique_slope(double theta, double q);
// Newton iteration on the same relation; iterations used is written to *iters
double oblique_slope_newton(double theta, double q, double p0, int* iters = nullptr);

// sets the ghost row from the boundary condition (and the full2d pole row to its average)
GraphState enforce_bc(GraphState state, const HemisphereGrid& grid, double theta);
// minimal-norm correction of the two rows nearest the equator so that the one-sided
// derivative (fourth order in axisym, second order in full2d) meets the boundary condition
GraphState project_bc(GraphState state, const HemisphereGrid& grid, double theta);
// max |one-sided d_beta u - p| on the equator, same stencils
double bc_residual(const GraphState& state, const HemisphereGrid& grid, double theta);

struct RhsDetail {
  std::vector<double> F;
  std::vector<double> v;     // sqrt(1 + |grad u|^2)
  std::vector<double> A;     // 1/(rho e^w) = cosh u + cos beta
  std::vector<double> coef;  // principal coefficient per node
};

// right-hand side of the scalar equation; the ghost row must already be enforced
RhsDetail scalar_rhs_detail(const GraphState& state, const HemisphereGrid& grid, double theta, FlowMode mode);
std::vector<double> scalar_rhs(const GraphState& state, const HemisphereGrid& grid, double theta,
                               FlowMode mode = FlowMode::mct);

// geometric normal speed: n<x + cos(theta) nu, e> - H <X_e, nu> (mct) or -H (mcf)
std::vector<double> normal_speed(const SurfaceSample& sample, FlowMode mode, double theta);

// least-squares factor c in F = c f v/(rho e^w) on a perturbed cap, interior nodes
double fitted_speed_factor(const HemisphereGrid& grid, double theta, FlowMode mode);

double explicit_dt(const GraphState& state, const FlowConfig& cfg);

// one accepted step; rejected candidates halve dt up to 10 times
FlowState step(const FlowState& state, const FlowConfig& cfg, const RunContext& ctx = {});

RunContext prepare_run(const FlowConfig& cfg, const GraphState& initial);

struct RunHooks {
  std::function<void(const TrajectoryRow&)> on_row;
  std::function<void(const FlowState&, const RunContext&)> on_checkpoint;
};

// projects the initial data onto the boundary condition and flows until
// max|F| < stop_tol, t >= t_max or max_steps; throws NotConverged on t_max
TrajectoryRecord run(const FlowConfig& cfg, const GraphState& initial, const RunHooks& hooks = {});
TrajectoryRecord resume(const FlowConfig& cfg, const FlowState& state, const RunContext& ctx,
                        const RunHooks& hooks = {});

Diagnostics diagnose(const GraphState& state, const FlowConfig& cfg);

}  // namespace capflow
