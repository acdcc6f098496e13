#include "capflow/io.hpp"

#include "capflow/errors.hpp"
#include "capflow/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

namespace capflow {

namespace {

// JSON has no infinity; null stands for it
json num(double x) { return std::isinf(x) ? json(nullptr) : json(x); }

std::string where(const std::string& ctx, const std::string& name) {
  return ctx.empty() ? name : ctx + "." + name;
}

const json& need(const json& j, const std::string& name, const std::string& ctx) {
  if (!j.is_object()) throw InvalidInput("field '" + (ctx.empty() ? std::string("<root>") : ctx) + "': expected an object");
  auto it = j.find(name);
  if (it == j.end()) throw InvalidInput("field '" + where(ctx, name) + "': missing");
  return *it;
}

double get_num(const json& j, const std::string& name, const std::string& ctx, bool allow_inf = false) {
  const json& v = need(j, name, ctx);
  if (allow_inf && v.is_null()) return kInfinity;
  if (!v.is_number()) throw InvalidInput("field '" + where(ctx, name) + "': expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw InvalidInput("field '" + where(ctx, name) + "': not finite");
  return x;
}

long get_int(const json& j, const std::string& name, const std::string& ctx) {
  const json& v = need(j, name, ctx);
  if (!v.is_number_integer()) throw InvalidInput("field '" + where(ctx, name) + "': expected an integer");
  return v.get<long>();
}

std::string get_str(const json& j, const std::string& name, const std::string& ctx) {
  const json& v = need(j, name, ctx);
  if (!v.is_string()) throw InvalidInput("field '" + where(ctx, name) + "': expected a string");
  return v.get<std::string>();
}

bool get_bool(const json& j, const std::string& name, const std::string& ctx) {
  const json& v = need(j, name, ctx);
  if (!v.is_boolean()) throw InvalidInput("field '" + where(ctx, name) + "': expected a boolean");
  return v.get<bool>();
}

template <class T, class F>
T optional(const json& j, const std::string& name, T fallback, F getter) {
  return j.contains(name) ? getter() : fallback;
}

// wraps InvalidInput from constructors so the message names the field
template <class F>
auto guarded(const std::string& field, F f) {
  try {
    return f();
  } catch (const InvalidInput& e) {
    throw InvalidInput("field '" + field + "': " + e.what());
  }
}

HemisphereGrid grid_from_json(const json& j, int n, const std::string& ctx) {
  const std::string mode = get_str(j, "mode", ctx);
  const long nb = get_int(j, "n_beta", ctx);
  if (mode == "axisym") return guarded(ctx, [&] { return HemisphereGrid(GridMode::axisym, n, static_cast<int>(nb)); });
  if (mode == "full2d") {
    const long nx = get_int(j, "n_xi", ctx);
    return guarded(ctx, [&] {
      return HemisphereGrid(GridMode::full2d, n, static_cast<int>(nb), static_cast<int>(nx));
    });
  }
  throw InvalidInput("field '" + where(ctx, "mode") + "': unknown grid mode " + mode);
}

json order_json(const OrderRow& r) {
  json o;
  o["quantity"] = r.quantity;
  o["theta"] = r.theta;
  o["r"] = r.r;
  o["k"] = r.k;
  o["errors"] = r.errors;
  json ords = json::array();
  for (double p : r.orders) ords.push_back(num(p));
  o["orders"] = ords;
  o["exact"] = r.exact;
  o["min_order"] = num(r.min_order);
  o["required"] = r.required;
  o["pass"] = r.pass;
  return o;
}

}  // namespace

json to_json(const HemisphereGrid& g) {
  json j{{"mode", g.axisym() ? "axisym" : "full2d"}, {"n_beta", g.n_beta}, {"n_xi", g.n_xi}};
  return j;
}

json to_json(const FlowConfig& c) {
  return json{{"mode", to_string(c.mode)},
              {"theta", c.theta},
              {"n", c.n()},
              {"grid", to_json(c.grid)},
              {"dt_safety", c.dt_safety},
              {"t_max", c.t_max},
              {"stop_tol", c.stop_tol},
              {"monitor_every", c.monitor_every},
              {"scheme", to_string(c.scheme)},
              {"imex_factor", c.imex_factor},
              {"dt_fixed", c.dt_fixed},
              {"max_steps", c.max_steps},
              {"checkpoint_every", c.checkpoint_every}};
}

FlowConfig config_from_json(const json& j) {
  const std::string ctx = "config";
  FlowConfig c;
  const long n = get_int(j, "n", ctx);
  if (n < 2) throw InvalidInput("field 'config.n': must be >= 2");
  c.mode = guarded(ctx + ".mode", [&] { return parse_flow_mode(get_str(j, "mode", ctx)); });
  c.theta = get_num(j, "theta", ctx);
  c.grid = grid_from_json(need(j, "grid", ctx), static_cast<int>(n), ctx + ".grid");
  c.dt_safety = optional(j, "dt_safety", c.dt_safety, [&] { return get_num(j, "dt_safety", ctx); });
  c.t_max = optional(j, "t_max", c.t_max, [&] { return get_num(j, "t_max", ctx); });
  c.stop_tol = optional(j, "stop_tol", c.stop_tol, [&] { return get_num(j, "stop_tol", ctx); });
  c.monitor_every = static_cast<int>(
      optional(j, "monitor_every", long{c.monitor_every}, [&] { return get_int(j, "monitor_every", ctx); }));
  if (j.contains("scheme")) c.scheme = guarded(ctx + ".scheme", [&] { return parse_scheme(get_str(j, "scheme", ctx)); });
  c.imex_factor = optional(j, "imex_factor", c.imex_factor, [&] { return get_num(j, "imex_factor", ctx); });
  c.dt_fixed = optional(j, "dt_fixed", c.dt_fixed, [&] { return get_num(j, "dt_fixed", ctx); });
  c.max_steps = optional(j, "max_steps", c.max_steps, [&] { return get_int(j, "max_steps", ctx); });
  c.checkpoint_every =
      optional(j, "checkpoint_every", c.checkpoint_every, [&] { return get_int(j, "checkpoint_every", ctx); });
  guarded(ctx, [&] {
    c.validate();
    return 0;
  });
  return c;
}

json to_json(const RunContext& c) {
  return json{{"w0_initial", c.w0_initial}, {"r_inf", num(c.r_inf)},   {"R1", c.R1},
              {"R2", num(c.R2)},            {"c1", c.c1},              {"c2", c.c2},
              {"c3", c.c3},                 {"brackets_active", c.brackets_active},
              {"kappa_min_initial", c.kappa_min_initial}};
}

RunContext context_from_json(const json& j) {
  const std::string ctx = "context";
  RunContext c;
  c.w0_initial = get_num(j, "w0_initial", ctx);
  c.r_inf = get_num(j, "r_inf", ctx, true);
  c.R1 = get_num(j, "R1", ctx);
  c.R2 = get_num(j, "R2", ctx, true);
  c.c1 = get_num(j, "c1", ctx);
  c.c2 = get_num(j, "c2", ctx);
  c.c3 = get_num(j, "c3", ctx);
  c.brackets_active = get_bool(j, "brackets_active", ctx);
  c.kappa_min_initial = get_num(j, "kappa_min_initial", ctx);
  return c;
}

json to_json(const TrajectoryMeta& m) {
  return json{{"config_hash", m.config_hash}, {"sign_convention", m.sign_convention},
              {"fitted_factor", m.fitted_factor}, {"context", to_json(m.context)},
              {"stop_reason", m.stop_reason}, {"converged", m.converged},
              {"rejections", m.rejections}, {"warnings", m.warnings}};
}

json to_json(const MonotonicityReport& r) {
  return json{{"max_drift", r.max_drift},
              {"violations", r.violations},
              {"worst_increase", r.worst_increase},
              {"dissipation_applicable", r.dissipation_applicable},
              {"window", {r.window_t0, r.window_t1}},
              {"dW1", r.dW1},
              {"dissipation_integral", r.dissipation_integral},
              {"dissipation_rel_error", r.dissipation_applicable ? json(r.dissipation_rel_error) : json(nullptr)}};
}

json to_json(const ConvergenceReport& r) {
  return json{{"converged", r.converged},       {"r_inf", num(r.r_inf)},
              {"final_dist", r.final_dist},     {"final_maxF", r.final_maxF},
              {"tail_monotone", r.tail_monotone}, {"tail_increases", r.tail_increases},
              {"kappa_min_inf", r.kappa_min_inf}};
}

json to_json(const EstimateReport& r) {
  const ShellDeltas& d = r.bundle.delta;
  return json{{"R1", num(r.bundle.R1)},
              {"R2", num(r.bundle.R2)},
              {"delta", {d.d0, d.d1, d.d2, d.d3, d.d4}},
              {"tol", r.tol},
              {"x_minus_e_nu_min", r.x_minus_e_nu_min},
              {"xe_nu_min", r.xe_nu_min},
              {"x_e_min", r.x_e_min},
              {"x_e_max", r.x_e_max},
              {"e_nu_max", r.e_nu_max},
              {"slack", {r.slack0, r.slack1, r.slack2, r.slack3, r.slack4}},
              {"pass", r.pass}};
}

json to_json(const ConsistencyReport& r) {
  json levels = json::array();
  for (const auto& g : r.levels) levels.push_back(g.spec());
  json rows = json::array();
  for (const auto& row : r.rows) rows.push_back(order_json(row));
  return json{{"levels", levels},
              {"rows", rows},
              {"sign",
               {{"chosen", to_string(r.sign.chosen)},
                {"defect_general_as_typeset", r.sign.defect_general},
                {"defect_free_boundary_as_typeset", r.sign.defect_free},
                {"passing", r.sign.passing},
                {"free_boundary_agreement", r.sign.free_boundary_agreement}}},
              {"min_order", num(r.min_order)},
              {"pass", r.pass}};
}

json to_json(const DiscBudget& b) { return json{{"C", b.C}, {"h", b.h}, {"tol", b.tol}}; }

json checkpoint_json(const FlowConfig& cfg, const FlowState& state, const RunContext& ctx) {
  json j;
  j["n"] = cfg.n();
  j["theta"] = cfg.theta;
  j["mode"] = to_string(cfg.mode);
  j["grid"] = to_json(cfg.grid);
  j["t"] = state.graph.t;
  j["u"] = state.graph.u;
  j["step"] = state.step_index;
  j["dt"] = state.dt_last;
  j["config_hash"] = config_hash(cfg);
  j["config"] = to_json(cfg);
  j["context"] = to_json(ctx);
  return j;
}

void write_checkpoint(const std::string& path, const FlowConfig& cfg, const FlowState& state, const RunContext& ctx) {
  write_json(path, checkpoint_json(cfg, state, ctx));
}

Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint c;
  const long n = get_int(j, "n", "");
  if (n < 2) throw InvalidInput("field 'n': must be >= 2");
  const double theta = get_num(j, "theta", "");
  const FlowMode mode = guarded("mode", [&] { return parse_flow_mode(get_str(j, "mode", "")); });
  const HemisphereGrid grid = grid_from_json(need(j, "grid", ""), static_cast<int>(n), "grid");
  if (j.contains("config")) {
    c.config = config_from_json(j["config"]);
    if (c.config.n() != n || c.config.theta != theta || c.config.mode != mode || c.config.grid.spec() != grid.spec())
      throw InvalidInput("field 'config': disagrees with the top-level n, theta, mode or grid");
  } else {
    c.config.mode = mode;
    c.config.theta = theta;
    c.config.grid = grid;
    guarded("theta", [&] {
      c.config.validate();
      return 0;
    });
  }
  c.state.graph.t = get_num(j, "t", "");
  const json& u = need(j, "u", "");
  if (!u.is_array()) throw InvalidInput("field 'u': expected an array");
  if (static_cast<long>(u.size()) != grid.nodes())
    throw InvalidInput("field 'u': expected " + std::to_string(grid.nodes()) + " values, got " + std::to_string(u.size()));
  c.state.graph.u.resize(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (!u[k].is_number() || !std::isfinite(u[k].get<double>()))
      throw InvalidInput("field 'u': entry " + std::to_string(k) + " is not a finite number");
    c.state.graph.u[k] = u[k].get<double>();
  }
  c.state.step_index = j.contains("step") ? get_int(j, "step", "") : 0;
  c.state.dt_last = j.contains("dt") ? get_num(j, "dt", "") : 0.0;
  c.config_hash = j.contains("config_hash") ? get_str(j, "config_hash", "") : config_hash(c.config);
  if (c.config_hash != config_hash(c.config))
    throw InvalidInput("field 'config_hash': does not match the stored configuration");
  if (j.contains("context")) {
    c.context = context_from_json(j["context"]);
  } else {
    c.context = prepare_run(c.config, c.state.graph);
  }
  return c;
}

Checkpoint read_checkpoint(const std::string& path) {
  try {
    return checkpoint_from_json(read_json(path));
  } catch (const InvalidInput& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

std::string trajectory_header(int n) {
  std::string h = "t,dt,maxF,kappa_min";
  for (int k = 0; k <= n; ++k) h += ",W" + std::to_string(k);
  h += ",dist_to_cap,step,dissipation,xe_nu_min,shell_violation";
  return h;
}

std::string trajectory_line(const TrajectoryRow& r) {
  std::ostringstream o;
  o.precision(17);
  o << r.t << ',' << r.dt << ',' << r.maxF << ',' << r.kappa_min;
  for (double w : r.W) o << ',' << w;
  o << ',' << r.dist_to_cap << ',' << r.step << ',' << r.dissipation << ',' << r.xe_nu_min << ','
    << r.shell_violation;
  return o.str();
}

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows, int n) {
  TrajectoryWriter w(path, n);
  for (const auto& r : rows) w.append(r);
}

std::vector<TrajectoryRow> read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(path + ": empty trajectory file");
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  int nW = 0;
  while (std::find(cols.begin(), cols.end(), "W" + std::to_string(nW)) != cols.end()) ++nW;
  if (nW < 3) throw InvalidInput(path + ": header lacks W0..Wn columns");
  auto col = [&](const std::string& name) {
    auto it = std::find(cols.begin(), cols.end(), name);
    return it == cols.end() ? -1 : static_cast<int>(it - cols.begin());
  };
  for (const char* req : {"t", "dt", "maxF", "kappa_min", "dist_to_cap"})
    if (col(req) < 0) throw InvalidInput(path + ": missing column " + req);
  std::vector<TrajectoryRow> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) {
      try {
        v.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw InvalidInput(path + ": line " + std::to_string(lineno) + " has a non-numeric entry");
      }
    }
    if (v.size() != cols.size()) throw InvalidInput(path + ": line " + std::to_string(lineno) + " has the wrong width");
    TrajectoryRow r;
    r.t = v[col("t")];
    r.dt = v[col("dt")];
    r.maxF = v[col("maxF")];
    r.kappa_min = v[col("kappa_min")];
    for (int k = 0; k < nW; ++k) r.W.push_back(v[col("W" + std::to_string(k))]);
    r.dist_to_cap = v[col("dist_to_cap")];
    if (col("step") >= 0) r.step = static_cast<long>(v[col("step")]);
    if (col("dissipation") >= 0) r.dissipation = v[col("dissipation")];
    if (col("xe_nu_min") >= 0) r.xe_nu_min = v[col("xe_nu_min")];
    if (col("shell_violation") >= 0) r.shell_violation = v[col("shell_violation")];
    if (!rows.empty() && !(r.t > rows.back().t))
      throw InvalidInput(path + ": t is not strictly increasing at line " + std::to_string(lineno));
    rows.push_back(std::move(r));
  }
  return rows;
}

TrajectoryWriter::TrajectoryWriter(const std::string& path, int n) : out_(path) {
  if (!out_) throw InvalidInput("cannot open " + path);
  out_ << trajectory_header(n) << '\n';
}

void TrajectoryWriter::append(const TrajectoryRow& row) {
  out_ << trajectory_line(row) << '\n';
  out_.flush();
}

void RunManifest::validate() const {
  config.validate();
  if (initial.kind != "cap" && initial.kind != "flat" && initial.kind != "perturbed_cap" && initial.kind != "file")
    throw InvalidInput("field 'initial.kind': expected cap, flat, perturbed_cap or file");
  if (!(initial.radius > 0.0)) throw InvalidInput("field 'initial.radius': must be positive");
  if (!(initial.amplitude >= 0.0)) throw InvalidInput("field 'initial.amplitude': must be >= 0");
  if (initial.wavenumber < 1) throw InvalidInput("field 'initial.wavenumber': must be an integer >= 1");
  if (initial.kind == "file" && !std::filesystem::exists(initial.path))
    throw InvalidInput("field 'initial.path': file does not exist: " + initial.path);
}

json to_json(const InitialSpec& s) {
  json j{{"kind", s.kind}};
  if (s.kind == "cap" || s.kind == "perturbed_cap") j["radius"] = s.radius;
  if (s.kind == "perturbed_cap") {
    j["amplitude"] = s.amplitude;
    j["wavenumber"] = s.wavenumber;
    j["phase"] = s.phase;
  }
  if (s.kind == "file") j["path"] = s.path;
  return j;
}

json to_json(const RunManifest& m) {
  return json{{"config", to_json(m.config)},
              {"config_hash", config_hash(m.config)},
              {"initial", to_json(m.initial)},
              {"out_dir", m.out_dir},
              {"seed", m.seed}};
}

InitialSpec initial_from_json(const json& j) {
  const std::string ctx = "initial";
  InitialSpec s;
  s.kind = get_str(j, "kind", ctx);
  s.radius = optional(j, "radius", s.radius, [&] { return get_num(j, "radius", ctx); });
  s.amplitude = optional(j, "amplitude", s.amplitude, [&] { return get_num(j, "amplitude", ctx); });
  s.wavenumber = static_cast<int>(
      optional(j, "wavenumber", long{s.wavenumber}, [&] { return get_int(j, "wavenumber", ctx); }));
  s.phase = optional(j, "phase", s.phase, [&] { return get_num(j, "phase", ctx); });
  s.path = optional(j, "path", s.path, [&] { return get_str(j, "path", ctx); });
  return s;
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  m.config = config_from_json(need(j, "config", ""));
  m.initial = initial_from_json(need(j, "initial", ""));
  m.out_dir = optional(j, "out_dir", m.out_dir, [&] { return get_str(j, "out_dir", ""); });
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      throw InvalidInput("field 'seed': expected a non-negative integer");
    m.seed = j["seed"].get<std::uint64_t>();
  }
  m.validate();
  return m;
}

RunManifest read_manifest(const std::string& path) {
  try {
    return manifest_from_json(read_json(path));
  } catch (const InvalidInput& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

GraphState initial_state(const InitialSpec& spec, const FlowConfig& cfg) {
  const int n = cfg.n();
  if (spec.kind == "cap") return cap_graph(CapParams{cfg.theta, spec.radius, n}, cfg.grid);
  if (spec.kind == "flat") return cap_graph(CapParams{cfg.theta, kInfinity, n}, cfg.grid);
  if (spec.kind == "perturbed_cap")
    return perturbed_cap(CapParams{cfg.theta, spec.radius, n}, cfg.grid, spec.amplitude, spec.wavenumber, spec.phase);
  if (spec.kind == "file") {
    const Checkpoint c = read_checkpoint(spec.path);
    if (c.config.grid.spec() != cfg.grid.spec() || c.config.n() != n)
      throw InvalidInput(spec.path + ": field 'grid': does not match the run grid " + cfg.grid.spec());
    GraphState g = c.state.graph;
    g.t = 0.0;
    return g;
  }
  throw InvalidInput("field 'initial.kind': unknown kind " + spec.kind);
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open " + path);
  out << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput(path + ": malformed JSON (" + std::string(e.what()) + ")");
  }
}

}  // namespace capflow
