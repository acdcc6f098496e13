#pragma once

#include "capflow/grid.hpp"

#include <string>
#include <vector>

namespace capflow {

struct TrajectoryRow {
  long step = 0;
  double t = 0.0;
  double dt = 0.0;
  double maxF = 0.0;
  double kappa_min = 0.0;
  std::vector<double> W;
  double dist_to_cap = 0.0;
  double dissipation = 0.0;  // n^2/(n+1) int (H_2 - H_1^2) <X_e, nu> dA
  double xe_nu_min = 0.0;
  double shell_violation = 0.0;  // > 0 when the state leaves the initial cap shell
};

// run-level constants fixed at the start of a run (and carried through checkpoints)
struct RunContext {
  double w0_initial = 0.0;
  double r_inf = 0.0;  // infinite when the initial volume is the flat-ball volume
  double R1 = 0.0, R2 = 0.0;
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;
  bool brackets_active = false;
  double kappa_min_initial = 0.0;
};

struct TrajectoryMeta {
  std::string config_hash;
  std::string sign_convention;
  double fitted_factor = 0.0;
  RunContext context;
  std::string stop_reason;  // converged | t_max | max_steps
  bool converged = false;
  long rejections = 0;
  std::vector<std::string> warnings;
};

struct TrajectoryRecord {
  TrajectoryMeta meta;
  std::vector<TrajectoryRow> rows;
  GraphState final_graph;
  long final_step = 0;
  double final_dt = 0.0;
};

}  // namespace capflow
