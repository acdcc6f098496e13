#include "capflow/cap.hpp"

#include "capflow/errors.hpp"
#include "capflow/numerics.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <map>
#include <mutex>

namespace capflow {

void CapParams::validate() const {
  if (!(theta > 0.0 && theta <= 0.5 * kPi + 1e-14))
    throw InvalidInput("contact angle must lie in (0, pi/2]");
  if (!(r > 0.0)) throw InvalidInput("cap radius must be positive or infinite");
  if (n < 2) throw InvalidInput("dimension n must be >= 2");
}

double cap_center(const CapParams& p) {
  if (p.flat()) throw InfiniteRadius("flat ball has no centre");
  return std::sqrt(p.r * p.r + 2.0 * p.r * cos_angle(p.theta) + 1.0);
}

CapShape cap_shape(const CapParams& p) {
  p.validate();
  const double ct = cos_angle(p.theta), st = sin_angle(p.theta);
  CapShape s;
  double d = 0.0, yb = -1.0;
  if (p.flat()) {
    s.alpha = p.theta;
    s.psi = 0.0;
    d = ct;
  } else {
    const double c = cap_center(p);
    s.alpha = std::atan2(p.r * st, 1.0 + p.r * ct);
    s.psi = std::atan2(st, p.r + ct);
    d = (2.0 * p.r * ct + 1.0) / (c + p.r);
    yb = -(c + p.r + 1.0) / (c + p.r - 1.0);
  }
  const double ya = (1.0 + d) / (1.0 - d);
  s.c_y = 0.5 * (ya + yb);
  s.R_y = 0.5 * (ya - yb);
  return s;
}

namespace {

double image_rho(const CapShape& s, double beta) {
  const double sb = std::sin(beta);
  return s.c_y * std::cos(beta) + std::sqrt(s.R_y * s.R_y - s.c_y * s.c_y * sb * sb);
}

}  // namespace

double cap_profile(const CapParams& p, double beta) { return std::log(image_rho(cap_shape(p), beta)); }

double cap_profile_slope(const CapParams& p, double beta) {
  const CapShape s = cap_shape(p);
  const double sb = std::sin(beta), cb = std::cos(beta);
  const double root = std::sqrt(s.R_y * s.R_y - s.c_y * s.c_y * sb * sb);
  const double drho = -s.c_y * sb - s.c_y * s.c_y * sb * cb / root;
  return drho / (s.c_y * cb + root);
}

GraphState cap_graph(const CapParams& p, const HemisphereGrid& grid) {
  const CapShape s = cap_shape(p);
  GraphState st = make_state(grid);
  for (int i = 0; i < grid.n_beta; ++i) {
    const double u = std::log(image_rho(s, grid.beta(i)));
    for (int j = 0; j < grid.n_xi; ++j) st.u[grid.index(i, j)] = u;
  }
  const double ug = std::log(image_rho(s, 0.5 * kPi + grid.h_beta()));
  std::fill(st.ghost.begin(), st.ghost.end(), ug);
  return st;
}

const char* to_string(BoundarySign s) {
  return s == BoundarySign::general_as_typeset ? "general_as_typeset" : "free_boundary_as_typeset";
}

std::vector<double> latitude_cap_quermass(double alpha, int n) {
  const double sa = std::sin(alpha), ca = std::cos(alpha);
  const double omega = sphere_area(n - 1);
  std::vector<double> w(n + 1, 0.0);
  w[0] = omega * sin_power_integral(n - 1, alpha);
  w[1] = omega * std::pow(sa, n - 1) / n;
  for (int k = 1; k <= n - 1; ++k) {
    const double int_hk = omega * std::pow(ca, k) * std::pow(sa, n - 1 - k);
    w[k + 1] = int_hk / n + static_cast<double>(k) / (n - k + 1) * w[k - 1];
  }
  return w;
}

std::vector<double> assemble_quermass(const QuermassParts& q, double theta, int n, BoundarySign sign) {
  const double ct = cos_angle(theta), st = sin_angle(theta);
  const double sigma = sign == BoundarySign::general_as_typeset ? 1.0 : -1.0;
  std::vector<double> w(n + 1, 0.0);
  w[0] = q.volume;
  w[1] = (q.area - ct * q.spherical[0]) / (n + 1);
  for (int k = 1; k <= n - 1; ++k) {
    double sum = 0.0;
    for (int l = 0; l < k; ++l) {
      // cos^{k-1} tan^l = cos^{k-1-l} sin^l
      const double trig = std::pow(ct, k - 1 - l) * std::pow(st, l);
      const double sgn = (k + l) % 2 == 0 ? 1.0 : -1.0;
      sum += sgn / (n - l) * binomial(k, l) * ((n - k) * ct * ct + k - l) * trig * q.spherical[l];
    }
    w[k + 1] = (q.int_H[k] - ct * std::pow(st, k) * q.spherical[k] - sigma * sum) / (n + 1);
  }
  return w;
}

std::vector<double> assemble_quermass_free_boundary(const QuermassParts& q, int n, BoundarySign sign) {
  const double sigma = sign == BoundarySign::general_as_typeset ? 1.0 : -1.0;
  std::vector<double> w(n + 1, 0.0);
  w[0] = q.volume;
  w[1] = q.area / (n + 1);
  for (int k = 1; k <= n - 1; ++k)
    w[k + 1] = (q.int_H[k] + sigma * static_cast<double>(k) / (n - k + 1) * q.spherical[k - 1]) / (n + 1);
  return w;
}

QuermassParts cap_parts(const CapParams& p) {
  const CapShape s = cap_shape(p);
  const int n = p.n;
  QuermassParts q;
  const double omega = sphere_area(n - 1);
  if (p.flat()) {
    q.volume = ball_volume(n) * sin_power_integral(n + 1, s.alpha);
    q.area = ball_volume(n) * std::pow(sin_angle(p.theta), n);
  } else {
    q.volume = ball_volume(n) * (std::pow(p.r, n + 1) * sin_power_integral(n + 1, s.psi) +
                                 sin_power_integral(n + 1, s.alpha));
    q.area = omega * std::pow(p.r, n) * sin_power_integral(n - 1, s.psi);
  }
  q.int_H.assign(n + 1, 0.0);
  for (int k = 0; k <= n; ++k) q.int_H[k] = p.flat() ? (k == 0 ? q.area : 0.0) : q.area * std::pow(p.r, -k);
  q.spherical = latitude_cap_quermass(s.alpha, n);
  return q;
}

std::vector<double> cap_quermass_all(const CapParams& p, BoundarySign sign) {
  return assemble_quermass(cap_parts(p), p.theta, p.n, sign);
}

double cap_quermass(const CapParams& p, int k, BoundarySign sign) {
  if (k < 0 || k > p.n) throw InvalidInput("quermassintegral index out of range");
  return cap_quermass_all(p, sign)[k];
}

double cap_quermass(const CapParams& p, int k) { return cap_quermass(p, k, resolved_boundary_sign()); }

std::vector<double> cap_variational_defect(double theta, double r, int n, BoundarySign sign) {
  const double h = 1e-3 * r;
  auto w = [&](double rr) { return cap_quermass_all(CapParams{theta, rr, n}, sign); };
  const auto wp2 = w(r + 2 * h), wp1 = w(r + h), wm1 = w(r - h), wm2 = w(r - 2 * h);
  const CapParams p{theta, r, n};
  const CapShape s = cap_shape(p);
  const double c = cap_center(p);
  const double dc = (r + cos_angle(theta)) / c;
  const double flux = sphere_area(n - 1) * std::pow(r, n) *
                      (sin_power_integral(n - 1, s.psi) - dc * std::pow(std::sin(s.psi), n) / n);
  std::vector<double> defect(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double deriv = (-wp2[k] + 8 * wp1[k] - 8 * wm1[k] + wm2[k]) / (12 * h);
    const double rhs = static_cast<double>(n + 1 - k) / (n + 1) * std::pow(r, -k) * flux;
    defect[k] = std::abs(deriv / rhs - 1.0);
  }
  return defect;
}

BoundarySign resolved_boundary_sign() {
  static const BoundarySign choice = [] {
    std::vector<BoundarySign> passing;
    for (BoundarySign s : {BoundarySign::general_as_typeset, BoundarySign::free_boundary_as_typeset}) {
      bool ok = true;
      for (int n : {2, 3, 4})
        for (double theta : {kPi / 3, 0.7, kPi / 2})
          for (double r : {0.5, 2.0})
            for (double d : cap_variational_defect(theta, r, n, s)) ok = ok && d < 0.01;
      if (ok) passing.push_back(s);
    }
    if (passing.size() != 1)
      throw NumericalFailure("variational test did not single out one boundary-sign convention");
    return passing.front();
  }();
  return choice;
}

double cap_quermass_upper_limit(double theta, int n, int k) {
  return cap_quermass(CapParams{theta, kInfinity, n}, k);
}

CapProfileTable::CapProfileTable(double theta, int n) : theta_(theta), n_(n) {
  CapParams{theta, 1.0, n}.validate();
  const int m = 161;
  radii_.resize(m);
  values_.resize(m, n + 1);
  const BoundarySign sign = resolved_boundary_sign();
  for (int i = 0; i < m; ++i) {
    radii_[i] = std::pow(10.0, -3.0 + 7.0 * i / (m - 1));
    const auto w = cap_quermass_all(CapParams{theta, radii_[i], n}, sign);
    for (int k = 0; k <= n; ++k) values_(i, k) = w[k];
  }
  // near the flat limit f_k saturates at roundoff; knots stop there
  used_.assign(n + 1, m);
  for (int k = 0; k <= n; ++k)
    for (int i = 1; i < m; ++i)
      if (!(values_(i, k) > values_(i - 1, k))) {
        if (radii_[i] < 100.0) throw NumericalFailure("cap profile function is not strictly increasing");
        used_[k] = i;
        break;
      }
  // Fritsch-Carlson slopes of log r against f_k
  slopes_.resize(m, n + 1);
  for (int k = 0; k <= n; ++k) {
    const int m = used_[k];
    std::vector<double> delta(m - 1);
    for (int i = 0; i + 1 < m; ++i)
      delta[i] = (std::log(radii_[i + 1]) - std::log(radii_[i])) / (values_(i + 1, k) - values_(i, k));
    slopes_(0, k) = delta[0];
    slopes_(m - 1, k) = delta[m - 2];
    for (int i = 1; i + 1 < m; ++i) {
      const double h0 = values_(i, k) - values_(i - 1, k), h1 = values_(i + 1, k) - values_(i, k);
      const double w1 = 2 * h1 + h0, w2 = h1 + 2 * h0;
      slopes_(i, k) = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }
}

std::shared_ptr<const CapProfileTable> CapProfileTable::get(double theta, int n) {
  static std::mutex mutex;
  static std::map<std::pair<double, int>, std::shared_ptr<const CapProfileTable>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{theta, n}];
  if (!slot) slot = std::make_shared<CapProfileTable>(theta, n);
  return slot;
}

double CapProfileTable::guess_log_radius(int k, double value) const {
  const int m = used_[k];
  if (value <= values_(0, k)) return std::log(radii_.front()) - 1.0;
  if (value >= values_(m - 1, k)) return std::log(radii_.back()) + 1.0;
  int lo = 0, hi = m - 1;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    (values_(mid, k) <= value ? lo : hi) = mid;
  }
  const double x0 = values_(lo, k), x1 = values_(hi, k), dx = x1 - x0;
  const double t = (value - x0) / dx;
  const double y0 = std::log(radii_[lo]), y1 = std::log(radii_[hi]);
  const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
  const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
  return h00 * y0 + h10 * dx * slopes_(lo, k) + h01 * y1 + h11 * dx * slopes_(hi, k);
}

double cap_radius_from_quermass(double theta, int n, int k, double value) {
  if (k < 0 || k > n) throw InvalidInput("quermassintegral index out of range");
  const double upper = cap_quermass_upper_limit(theta, n, k);
  if (!(value > 0.0 && value < upper))
    throw OutOfRange("value " + std::to_string(value) + " outside the attainable range (0, " +
                     std::to_string(upper) + ")");
  const auto table = CapProfileTable::get(theta, n);
  const BoundarySign sign = resolved_boundary_sign();
  auto g = [&](double s) { return cap_quermass(CapParams{theta, std::exp(s), n}, k, sign) - value; };
  const double s0 = table->guess_log_radius(k, value);
  const double smin = std::log(1e-12), smax = std::log(1e15);
  double lo = std::max(s0 - 0.05, smin), hi = std::min(s0 + 0.05, smax);
  double glo = g(lo), ghi = g(hi);
  for (double step = 0.5; glo > 0.0 && lo > smin; step *= 2) {
    hi = lo, ghi = glo;
    lo = std::max(lo - step, smin);
    glo = g(lo);
  }
  for (double step = 0.5; ghi < 0.0 && hi < smax; step *= 2) {
    lo = hi, glo = ghi;
    hi = std::min(hi + step, smax);
    ghi = g(hi);
  }
  if (glo > 0.0 || ghi < 0.0) throw OutOfRange("value not bracketed by the cap family");
  if (glo == 0.0) return std::exp(lo);
  if (ghi == 0.0) return std::exp(hi);
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi,
                                                        boost::math::tools::eps_tolerance<double>(52), iters);
  return std::exp(0.5 * (a + b));
}

namespace {

// max over nodes of (u - u_r), and of (u_r - u)
std::pair<double, double> profile_gap(const GraphState& st, const HemisphereGrid& grid, double theta, double r) {
  const CapShape shape = cap_shape(CapParams{theta, r, grid.n});
  double above = -kInfinity, below = -kInfinity;
  for (int i = 0; i < grid.n_beta; ++i) {
    const double ur = std::log(image_rho(shape, grid.beta(i)));
    for (int j = 0; j < grid.n_xi; ++j) {
      const double u = st.u[grid.index(i, j)];
      above = std::max(above, u - ur);
      below = std::max(below, ur - u);
    }
  }
  return {above, below};
}

}  // namespace

ShellRadii shell_radii(const GraphState& st, const HemisphereGrid& grid, double theta, double tol) {
  ShellRadii out;
  const double lo_s = std::log(1e-8), hi_s = std::log(1e8);
  auto inside_inscribed = [&](double s) { return profile_gap(st, grid, theta, std::exp(s)).first <= tol; };
  auto inside_circumscribed = [&](double s) { return profile_gap(st, grid, theta, std::exp(s)).second <= tol; };
  if (!inside_inscribed(lo_s)) throw ShellViolation("no inscribed cap found");
  if (profile_gap(st, grid, theta, kInfinity).first <= tol) {
    out.R1 = kInfinity;
  } else {
    double a = lo_s, b = hi_s;
    if (inside_inscribed(b)) b = hi_s;
    for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
      const double m = 0.5 * (a + b);
      (inside_inscribed(m) ? a : b) = m;
    }
    out.R1 = std::exp(a);
  }
  if (profile_gap(st, grid, theta, kInfinity).second > tol) {
    out.R2 = kInfinity;
  } else {
    double a = lo_s, b = hi_s;
    if (!inside_circumscribed(b)) return out;  // only the flat ball circumscribes
    for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
      const double m = 0.5 * (a + b);
      (inside_circumscribed(m) ? b : a) = m;
    }
    out.R2 = std::exp(b);
  }
  return out;
}

double shell_violation(const GraphState& st, const HemisphereGrid& grid, double theta, const ShellRadii& shell) {
  double v = -kInfinity;
  if (std::isfinite(shell.R1) || shell.R1 == kInfinity) v = std::max(v, profile_gap(st, grid, theta, shell.R1).first);
  v = std::max(v, profile_gap(st, grid, theta, shell.R2).second);
  return v;
}

ShellDeltas shell_deltas(double theta, double R1, double R2) {
  if (!(R1 > 0.0) || !(R2 >= R1)) throw InvalidInput("shell radii need 0 < R1 <= R2");
  const double ct = cos_angle(theta), st = sin_angle(theta);
  ShellDeltas d;
  if (R2 != kInfinity) d.d0 = st * st / (std::sqrt(R2 * R2 + 2.0 * R2 * ct + 1.0) + R2 + ct);
  if (R1 == kInfinity) {
    d.d1 = 1.0 - ct;
    d.d3 = 1.0 - ct;
    d.d4 = st;
  } else {
    const double s1 = std::sqrt(R1 * R1 + 2.0 * R1 * ct + 1.0);
    d.d1 = 1.0 - (1.0 + R1 * ct) / s1;
    d.d3 = d.d1;
    d.d4 = R1 * st / s1;
  }
  d.d2 = 0.5 * d.d1;
  return d;
}

}  // namespace capflow
