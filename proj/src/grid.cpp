#include "capflow/grid.hpp"

#include "capflow/errors.hpp"
#include "capflow/numerics.hpp"

#include <charconv>

namespace capflow {

HemisphereGrid::HemisphereGrid(GridMode m, int dim, int nb, int nx)
    : mode(m), n(dim), n_beta(nb), n_xi(m == GridMode::axisym ? 1 : nx) {
  if (n < 2) throw InvalidInput("dimension n must be >= 2");
  if (n_beta < 16) throw InvalidInput("n_beta must be >= 16");
  if (mode == GridMode::full2d) {
    if (n != 2) throw InvalidInput("full2d grids require n = 2");
    if (n_xi < 8 || n_xi % 2 != 0) throw InvalidInput("n_xi must be even and >= 8");
  }
}

namespace {
int parse_int(std::string_view s, const std::string& what) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw InvalidInput("bad grid field: " + what);
  return v;
}
}  // namespace

HemisphereGrid HemisphereGrid::parse(const std::string& spec, int n) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw InvalidInput("grid spec needs a mode prefix: " + spec);
  const std::string mode = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  if (mode == "axisym") return HemisphereGrid(GridMode::axisym, n, parse_int(rest, spec));
  if (mode == "full2d") {
    const auto x = rest.find('x');
    if (x == std::string::npos) throw InvalidInput("full2d grid spec is <n_beta>x<n_xi>: " + spec);
    return HemisphereGrid(GridMode::full2d, n, parse_int(rest.substr(0, x), spec),
                          parse_int(rest.substr(x + 1), spec));
  }
  throw InvalidInput("unknown grid mode: " + mode);
}

std::string HemisphereGrid::spec() const {
  if (axisym()) return "axisym:" + std::to_string(n_beta);
  return "full2d:" + std::to_string(n_beta) + "x" + std::to_string(n_xi);
}

double HemisphereGrid::h_beta() const { return 0.5 * kPi / (n_beta - 1); }
double HemisphereGrid::h_xi() const { return 2.0 * kPi / n_xi; }
double HemisphereGrid::beta(int i) const { return i == n_beta - 1 ? 0.5 * kPi : i * h_beta(); }
double HemisphereGrid::xi(int j) const { return j * h_xi(); }

GraphState make_state(const HemisphereGrid& grid, double value) {
  GraphState s;
  s.u.assign(grid.nodes(), value);
  s.ghost.assign(grid.n_xi, value);
  return s;
}

}  // namespace capflow
