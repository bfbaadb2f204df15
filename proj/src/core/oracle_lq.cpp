#include "mfg/oracle_lq.hpp"

#include <algorithm>
#include <cmath>

#include "mfg/error.hpp"
#include "mfg/io.hpp"

namespace mfg {

LQParams lq_params_from(const CoefficientSet& cs, double T) {
  if (cs.family != "lq") throw UnsupportedError("oracle needs the lq family, got '" + cs.family + "'");
  if (cs.dim != 1) throw UnsupportedError("oracle is scalar only");
  auto get = [&](const char* k) {
    auto it = cs.params.find(k);
    return it == cs.params.end() ? 0.0 : it->second;
  };
  return {get("p"), get("p_bar"), get("q"), get("q_bar"), T};
}

namespace {

constexpr double kBlowUp = 1e8;

struct State {
  double a, b, c;
};

State rhs(const LQParams& P, const State& s) {
  return {P.q - s.a * s.a, P.q_bar - 2.0 * s.a * s.b - s.b * s.b, P.q + P.q_bar - (s.a + s.b) * s.c};
}

State axpy(const State& s, double h, const State& k) { return {s.a + h * k.a, s.b + h * k.b, s.c + h * k.c}; }

RiccatiPath integrate(const LQParams& P, double dt, bool shifted) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be positive");
  if (!(P.T >= 0.0) || !std::isfinite(P.T)) throw ValidationError("horizon must be nonnegative");
  for (double v : {P.p, P.p_bar, P.q, P.q_bar})
    if (!std::isfinite(v)) throw ValidationError("LQ parameters must be finite");
  RiccatiPath path;
  path.params = P;
  State s{P.p, P.p_bar, P.p + P.p_bar};
  double t = 0.0;
  auto push = [&] {
    path.t.push_back(t);
    path.a.push_back(s.a);
    path.b.push_back(s.b);
    if (shifted) path.c.push_back(s.c);
  };
  push();
  while (t < P.T) {
    double h = std::min(dt, P.T - t);
    if (P.T - t - h < 1e-12 * std::max(1.0, P.T)) h = P.T - t;
    const State k1 = rhs(P, s);
    const State k2 = rhs(P, axpy(s, 0.5 * h, k1));
    const State k3 = rhs(P, axpy(s, 0.5 * h, k2));
    const State k4 = rhs(P, axpy(s, h, k3));
    s = {s.a + h / 6.0 * (k1.a + 2 * k2.a + 2 * k3.a + k4.a), s.b + h / 6.0 * (k1.b + 2 * k2.b + 2 * k3.b + k4.b),
         s.c + h / 6.0 * (k1.c + 2 * k2.c + 2 * k3.c + k4.c)};
    t = t + h >= P.T ? P.T : t + h;
    if (!(std::fabs(s.a) <= kBlowUp) || !(std::fabs(s.b) <= kBlowUp))
      throw BlowUpError("Riccati solution blows up near t = " + io::fmt(t), t);
    push();
  }
  return path;
}

// cubic Hermite on the stored grid using the ODE right-hand side as slopes
double hermite(const RiccatiPath& p, const std::vector<double>& v, int which, double s) {
  if (p.t.empty()) throw ValidationError("empty Riccati path");
  s = std::clamp(s, p.t.front(), p.t.back());
  if (s == p.t.front()) return v.front();
  auto it = std::upper_bound(p.t.begin(), p.t.end(), s);
  std::size_t j = it == p.t.end() ? p.t.size() - 2 : static_cast<std::size_t>(it - p.t.begin()) - 1;
  const double h = p.t[j + 1] - p.t[j];
  const double u = (s - p.t[j]) / h;
  auto slope = [&](std::size_t i) {
    const State r = rhs(p.params, {p.a[i], p.b[i], p.c.empty() ? 0.0 : p.c[i]});
    return which == 0 ? r.a : which == 1 ? r.b : r.c;
  };
  const double m0 = slope(j), m1 = slope(j + 1);
  const double u2 = u * u, u3 = u2 * u;
  return (2 * u3 - 3 * u2 + 1) * v[j] + (u3 - 2 * u2 + u) * h * m0 + (-2 * u3 + 3 * u2) * v[j + 1] +
         (u3 - u2) * h * m1;
}

}  // namespace

RiccatiPath riccati_solve(const LQParams& params, double dt) { return integrate(params, dt, false); }
RiccatiPath riccati_solve_shifted(const LQParams& params, double dt) { return integrate(params, dt, true); }

double RiccatiPath::a_at(double s) const { return hermite(*this, a, 0, s); }
double RiccatiPath::b_at(double s) const { return hermite(*this, b, 1, s); }
double RiccatiPath::c_at(double s) const {
  if (c.empty()) throw ValidationError("path was solved without the shifted component");
  return hermite(*this, c, 2, s);
}

FieldPtr oracle_field(const RiccatiPath& path) {
  auto p = std::make_shared<const RiccatiPath>(path);
  return make_field(1, [p](double t, std::span<const double> xs, const EmpiricalMeasure& mu, std::span<double> out) {
    const double a = p->a_at(t), b = p->b_at(t);
    const double m = mu.mean()[0];
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = a * xs[i] + b * m;
  });
}

FieldPtr oracle_field(const LQParams& params, double dt) { return oracle_field(riccati_solve(params, dt)); }

std::string riccati_to_csv(const RiccatiPath& path) {
  std::string out = path.c.empty() ? "t,a,b\n" : "t,a,b,c\n";
  for (std::size_t i = 0; i < path.t.size(); ++i) {
    out += io::fmt(path.t[i]) + "," + io::fmt(path.a[i]) + "," + io::fmt(path.b[i]);
    if (!path.c.empty()) out += "," + io::fmt(path.c[i]);
    out += "\n";
  }
  return out;
}

}  // namespace mfg
