#include "capflow/cap.hpp"
#include "capflow/errors.hpp"
#include "capflow/flow.hpp"
#include "capflow/io.hpp"
#include "capflow/quermass.hpp"
#include "capflow/surface.hpp"
#include "capflow/verify.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace capflow;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

GraphState state_of(py::array_t<double, py::array::c_style | py::array::forcecast> u, const HemisphereGrid& grid,
                    double theta) {
  if (u.ndim() != 1 || u.shape(0) != grid.nodes())
    throw InvalidInput("u must be a flat array of " + std::to_string(grid.nodes()) + " values");
  GraphState s = make_state(grid);
  std::copy(u.data(), u.data() + u.shape(0), s.u.begin());
  return enforce_bc(std::move(s), grid, theta);
}

py::dict rows_dict(const std::vector<TrajectoryRow>& rows) {
  std::vector<double> t, maxF, kmin, dist, diss;
  std::vector<std::vector<double>> W;
  for (const auto& r : rows) {
    t.push_back(r.t);
    maxF.push_back(r.maxF);
    kmin.push_back(r.kappa_min);
    dist.push_back(r.dist_to_cap);
    diss.push_back(r.dissipation);
    W.push_back(r.W);
  }
  py::dict d;
  d["t"] = to_array(t);
  d["maxF"] = to_array(maxF);
  d["kappa_min"] = to_array(kmin);
  d["dist_to_cap"] = to_array(dist);
  d["dissipation"] = to_array(diss);
  d["W"] = W;
  return d;
}

py::dict record_dict(const TrajectoryRecord& rec, const FlowConfig& cfg) {
  py::dict d = rows_dict(rec.rows);
  d["u"] = to_array(rec.final_graph.u);
  d["final_t"] = rec.final_graph.t;
  d["final_step"] = rec.final_step;
  d["converged"] = rec.meta.converged;
  d["stop_reason"] = rec.meta.stop_reason;
  d["config_hash"] = rec.meta.config_hash;
  d["r_inf"] = rec.meta.context.r_inf;
  d["fitted_factor"] = rec.meta.fitted_factor;
  const MonotonicityReport m = monotonicity_report(rec);
  d["max_drift"] = m.max_drift;
  d["violations"] = m.violations;
  if (rec.meta.converged) d["final_dist"] = convergence_check(rec, cfg.theta, cfg.grid).final_dist;
  return d;
}

}  // namespace

PYBIND11_MODULE(_capflow, m) {
  m.doc() = "capillary curvature flow in the unit ball";

  auto& base = py::register_exception<Error>(m, "CapflowError");
  auto& numerical = py::register_exception<NumericalFailure>(m, "NumericalFailure", base.ptr());
  py::register_exception<NotConverged>(m, "NotConverged", base.ptr());
  (void)numerical;
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InvalidInput& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const OutOfRange& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ShellViolation& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  py::class_<HemisphereGrid>(m, "Grid")
      .def(py::init([](const std::string& spec, int n) { return HemisphereGrid::parse(spec, n); }), py::arg("spec"),
           py::arg("n") = 2)
      .def_readonly("n", &HemisphereGrid::n)
      .def_readonly("n_beta", &HemisphereGrid::n_beta)
      .def_readonly("n_xi", &HemisphereGrid::n_xi)
      .def_property_readonly("nodes", &HemisphereGrid::nodes)
      .def_property_readonly("h_beta", &HemisphereGrid::h_beta)
      .def_property_readonly("beta", [](const HemisphereGrid& g) {
        std::vector<double> b(g.n_beta);
        for (int i = 0; i < g.n_beta; ++i) b[i] = g.beta(i);
        return to_array(b);
      })
      .def("spec", &HemisphereGrid::spec)
      .def("__repr__", [](const HemisphereGrid& g) { return "Grid('" + g.spec() + "', n=" + std::to_string(g.n) + ")"; });

  py::class_<FlowConfig>(m, "FlowConfig")
      .def(py::init([](double theta, const HemisphereGrid& grid, const std::string& mode, const std::string& scheme,
                       double stop_tol, double t_max, long max_steps, int monitor_every, double dt) {
             FlowConfig c;
             c.theta = theta;
             c.grid = grid;
             c.mode = parse_flow_mode(mode);
             c.scheme = parse_scheme(scheme);
             c.stop_tol = stop_tol;
             c.t_max = t_max;
             c.max_steps = max_steps;
             c.monitor_every = monitor_every;
             c.dt_fixed = dt;
             c.validate();
             return c;
           }),
           py::arg("theta"), py::arg("grid"), py::arg("mode") = "mct", py::arg("scheme") = "explicit_euler",
           py::arg("stop_tol") = 1e-6, py::arg("t_max") = 50.0, py::arg("max_steps") = 0, py::arg("monitor_every") = 1,
           py::arg("dt") = 0.0)
      .def_readonly("theta", &FlowConfig::theta)
      .def_readonly("grid", &FlowConfig::grid)
      .def_property_readonly("hash", [](const FlowConfig& c) { return config_hash(c); });

  m.def("cap_center", [](double theta, double r) { return cap_center(CapParams{theta, r, 2}); }, py::arg("theta"),
        py::arg("r"));
  m.def(
      "cap_quermass", [](double theta, double r, int k, int n) { return cap_quermass(CapParams{theta, r, n}, k); },
      py::arg("theta"), py::arg("r"), py::arg("k"), py::arg("n") = 2, "W_k of the cap; r = inf for the flat ball");
  m.def("cap_radius_from_quermass", &cap_radius_from_quermass, py::arg("theta"), py::arg("n"), py::arg("k"),
        py::arg("value"));
  m.def("shell_deltas", [](double theta, double R1, double R2) {
    const ShellDeltas d = shell_deltas(theta, R1, R2);
    return std::vector<double>{d.d0, d.d1, d.d2, d.d3, d.d4};
  });
  m.def("cap_graph", [](double theta, double r, const HemisphereGrid& g) {
    return to_array(cap_graph(CapParams{theta, r, g.n}, g).u);
  });
  m.def(
      "perturbed_cap",
      [](double theta, double r, const HemisphereGrid& g, double amplitude, int wavenumber, double phase) {
        return to_array(perturbed_cap(CapParams{theta, r, g.n}, g, amplitude, wavenumber, phase).u);
      },
      py::arg("theta"), py::arg("r"), py::arg("grid"), py::arg("amplitude"), py::arg("wavenumber") = 1,
      py::arg("phase") = 0.0);
  m.def(
      "quermass",
      [](py::array_t<double> u, const HemisphereGrid& g, double theta) {
        const SurfaceSample s = reconstruct(state_of(u, g, theta), g);
        const QuermassVector q = quermass_vector(s, theta);
        py::dict d;
        d["W"] = q.W;
        d["area"] = q.area;
        d["boundary_length"] = q.boundary_length;
        d["boundary_area"] = q.boundary_area;
        d["kappa_min"] = s.kappa_min();
        d["kappa_max"] = s.kappa_max();
        d["sign_convention"] = std::string(to_string(q.sign));
        return d;
      },
      py::arg("u"), py::arg("grid"), py::arg("theta"));
  m.def(
      "scalar_rhs",
      [](py::array_t<double> u, const HemisphereGrid& g, double theta, const std::string& mode) {
        return to_array(scalar_rhs(state_of(u, g, theta), g, theta, parse_flow_mode(mode)));
      },
      py::arg("u"), py::arg("grid"), py::arg("theta"), py::arg("mode") = "mct");
  m.def(
      "minkowski_residual",
      [](py::array_t<double> u, const HemisphereGrid& g, double theta, int k) {
        return minkowski_residual(reconstruct(state_of(u, g, theta), g), k, theta);
      },
      py::arg("u"), py::arg("grid"), py::arg("theta"), py::arg("k"));
  m.def(
      "af_check",
      [](py::array_t<double> u, const HemisphereGrid& g, double theta, int k) {
        return af_check(reconstruct(state_of(u, g, theta), g), k, theta);
      },
      py::arg("u"), py::arg("grid"), py::arg("theta"), py::arg("k") = 1);
  m.def(
      "run",
      [](const FlowConfig& cfg, py::array_t<double> u) {
        const GraphState g0 = state_of(u, cfg.grid, cfg.theta);
        TrajectoryRecord rec;
        {
          py::gil_scoped_release release;
          try {
            rec = run(cfg, g0);
          } catch (const NotConverged& e) {
            rec = e.trajectory;
          }
        }
        return record_dict(rec, cfg);
      },
      py::arg("config"), py::arg("u"), "flow until max|F| < stop_tol or a limit; never raises NotConverged");
  m.def("read_checkpoint", [](const std::string& path) {
    const Checkpoint c = read_checkpoint(path);
    py::dict d;
    d["config"] = c.config;
    d["u"] = to_array(c.state.graph.u);
    d["t"] = c.state.graph.t;
    d["step"] = c.state.step_index;
    d["config_hash"] = c.config_hash;
    return d;
  });
  m.def("read_trajectory", [](const std::string& path) { return rows_dict(read_trajectory_csv(path)); });
}
