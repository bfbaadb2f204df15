#include "mfg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfg/error.hpp"
#include "mfg/io.hpp"
#include "mfg/rng.hpp"

namespace mfg {

double predicted_w_exponent(RegimeKind kind, double g) {
  switch (kind) {
    case RegimeKind::WeakStrongInX: return 1.0;
    case RegimeKind::StrongInX:
    case RegimeKind::WeakStrongInW: return g / (2.0 - g);
    case RegimeKind::StrongInW: return g * g / (2.0 - g * g);
    default: throw ValidationError("no stability exponent for regime '" + to_string(kind) + "'");
  }
}

double predicted_x_exponent(RegimeKind kind, double g) {
  switch (kind) {
    case RegimeKind::WeakStrongInX: return g;
    case RegimeKind::StrongInX: return g * g / (2.0 - g);
    case RegimeKind::WeakStrongInW: return 1.0 / (2.0 - g);
    case RegimeKind::StrongInW: return g / (2.0 - g * g);
    default: throw ValidationError("no stability exponent for regime '" + to_string(kind) + "'");
  }
}

double gamma_norm(double a, double gamma) { return std::max(a, std::pow(a, gamma)); }

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionError("slope fit needs equal-length series");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double dn = static_cast<double>(n);
  const double den = sxx - sx * sx / dn;
  if (!(den > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return (sxy - sx * sy / dn) / den;
}

namespace {

double l2_diff(std::span<const double> a, std::span<const double> b, std::size_t N) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s / static_cast<double>(N));
}

std::vector<double> w_path(const Field& field, const MeasureFlow& flow, double T) {
  const std::size_t n = flow.n_particles * flow.dim;
  std::vector<double> w((flow.steps() + 1) * n);
  for (std::size_t k = 0; k <= flow.steps(); ++k)
    field.evaluate(T - flow.times[k], flow.states(k), flow.measure_at(k), std::span<double>(w.data() + k * n, n));
  return w;
}

std::vector<double> w_path_frozen(const Field& field, const MeasureFlow& flow, const std::vector<EmpiricalMeasure>& m,
                                  double T) {
  const std::size_t n = flow.n_particles * flow.dim;
  std::vector<double> w((flow.steps() + 1) * n);
  for (std::size_t k = 0; k <= flow.steps(); ++k)
    field.evaluate(T - flow.times[k], flow.states(k), m[k], std::span<double>(w.data() + k * n, n));
  return w;
}

void require_estimate_regime(const CoefficientSet& cs) {
  const auto k = cs.regime.kind;
  if (k == RegimeKind::None || k == RegimeKind::JointMonotone)
    throw ValidationError("stability estimates need a weak-strong or strong regime, got '" + to_string(k) + "'");
}

void finish(EstimateReport& rep, const std::vector<double>& sizes, const std::vector<double>& dw,
            const std::vector<double>& dx) {
  rep.fitted_exponent = fit_loglog_slope(sizes, dw);
  rep.fitted_x_exponent = fit_loglog_slope(sizes, dx);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (auto& r : rep.rows) {
    r.fitted_exponent = rep.fitted_exponent;
    if (r.perturbation_size > 0.0) {
      lo = std::min(lo, r.ratio_W);
      hi = std::max(hi, r.ratio_W);
    }
  }
  rep.ratio_spread = lo > 0.0 && std::isfinite(lo) ? hi / lo : std::numeric_limits<double>::infinity();
  rep.passed = std::isfinite(rep.fitted_exponent) && rep.fitted_exponent >= rep.predicted_exponent - rep.slack;
  if (rep.passed && rep.predicted_exponent == 1.0)
    rep.passed = rep.fitted_exponent <= 1.0 + rep.slack && rep.ratio_spread <= 1.0 + rep.slack;
}

std::vector<double> reference_particles(const CoefficientSet& cs, const SolverScenario& sc, std::size_t reference) {
  if (reference >= sc.references.size()) throw ValidationError("reference index out of range");
  if (sc.references[reference].dim() != cs.dim) throw DimensionError("reference dimension differs from the coefficients");
  const auto r = resample_references({sc.references[reference]}, sc.N, sc.seed);
  return {r[0].points().begin(), r[0].points().end()};
}

}  // namespace

EstimateReport stability_harness(const Field& field, const CoefficientSet& cs, const SolverScenario& sc,
                                 const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs,
                                 double slack) {
  require_estimate_regime(cs);
  if (pairs.empty()) throw ValidationError("stability harness needs at least one cloud pair");
  EstimateReport rep;
  rep.kind = "state";
  rep.regime = cs.regime.kind;
  rep.gamma = cs.gamma;
  rep.slack = slack;
  rep.predicted_exponent = predicted_w_exponent(cs.regime.kind, cs.gamma);
  rep.predicted_x_exponent = predicted_x_exponent(cs.regime.kind, cs.gamma);
  const SimulationSpec spec{sc.T, sc.dt, sc.sigma_x, 0.0, sc.seed};
  std::vector<double> sizes, dws, dxs;
  for (const auto& [x0, y0] : pairs) {
    if (x0.size() != y0.size() || x0.size() % cs.dim != 0) throw DimensionError("cloud pair sizes differ");
    const std::size_t N = x0.size() / cs.dim, n = x0.size();
    const auto fx = simulate_particles(cs, field, x0, spec);
    const auto fy = simulate_particles(cs, field, y0, spec);
    const auto wx = w_path(field, fx, sc.T), wy = w_path(field, fy, sc.T);
    const double d0 = l2_diff(fx.states(0), fy.states(0), N);
    double sup_w = 0.0, sup_x = 0.0;
    for (std::size_t k = 0; k <= fx.steps(); ++k) {
      sup_w = std::max(sup_w, l2_diff({wx.data() + k * n, n}, {wy.data() + k * n, n}, N));
      sup_x = std::max(sup_x, l2_diff(fx.states(k), fy.states(k), N));
    }
    EstimateRow row;
    row.perturbation_size = d0;
    row.ratio_W = d0 > 0.0 ? sup_w / d0 : 0.0;
    row.ratio_X = d0 > 0.0 ? sup_x / gamma_norm(d0, cs.gamma) : 0.0;
    rep.rows.push_back(row);
    sizes.push_back(d0);
    dws.push_back(sup_w);
    dxs.push_back(sup_x);
  }
  finish(rep, sizes, dws, dxs);
  return rep;
}

EstimateReport stability_harness(const DecouplingField& field, const CoefficientSet& cs, const SolverScenario& sc,
                                 const StabilityOptions& opts) {
  if (!field.converged)
    throw ConvergenceError("stability harness needs a converged field", field.final_increment, field.iteration_count);
  require_estimate_regime(cs);
  const auto x0 = reference_particles(cs, sc, opts.reference);
  const CounterRng rng(sc.seed, streams::kPerturbation);
  std::vector<double> e(x0.size());
  double s = 0.0;
  for (std::size_t j = 0; j < e.size(); ++j) {
    e[j] = rng.normal(j);
    s += e[j] * e[j];
  }
  const double scale = 1.0 / std::sqrt(s / static_cast<double>(sc.N));
  std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
  for (double delta : opts.sizes) {
    if (!(delta > 0.0)) throw ValidationError("perturbation sizes must be positive");
    auto y0 = x0;
    for (std::size_t j = 0; j < y0.size(); ++j) y0[j] += delta * scale * e[j];
    pairs.emplace_back(x0, std::move(y0));
  }
  auto rep = stability_harness(static_cast<const Field&>(field), cs, sc, pairs, opts.slack);
  for (std::size_t i = 0; i < rep.rows.size(); ++i) rep.rows[i].perturbation_size = opts.sizes[i];
  return rep;
}

MeasureGap measure_perturbation_gap(const Field& field, const CoefficientSet& cs, const SolverScenario& sc,
                                    double delta, std::size_t reference) {
  if (!(delta >= 0.0)) throw ValidationError("measure perturbation must be nonnegative");
  const auto x0 = reference_particles(cs, sc, reference);
  const SimulationSpec spec{sc.T, sc.dt, sc.sigma_x, 0.0, sc.seed};
  const auto base = simulate_particles(cs, field, x0, spec);
  std::vector<EmpiricalMeasure> m1, m2;
  std::vector<double> shift(cs.dim, 0.0);
  shift[0] = delta;
  for (std::size_t k = 0; k <= base.steps(); ++k) {
    m1.push_back(base.measure_at(k));
    m2.push_back(pushforward_shift(m1.back(), shift));
  }
  const auto f1 = simulate_frozen(cs, field, x0, m1, spec);
  const auto f2 = simulate_frozen(cs, field, x0, m2, spec);
  const auto w1 = w_path_frozen(field, f1, m1, sc.T), w2 = w_path_frozen(field, f2, m2, sc.T);
  const std::size_t n = x0.size();
  MeasureGap g;
  for (std::size_t k = 0; k <= base.steps(); ++k) {
    g.sup_w = std::max(g.sup_w, l2_diff({w1.data() + k * n, n}, {w2.data() + k * n, n}, sc.N));
    g.sup_x = std::max(g.sup_x, l2_diff(f1.states(k), f2.states(k), sc.N));
  }
  return g;
}

EstimateReport measure_stability_harness(const DecouplingField& field, const CoefficientSet& cs,
                                         const SolverScenario& sc, const std::vector<double>& deltas, double slack) {
  if (!field.converged)
    throw ConvergenceError("measure harness needs a converged field", field.final_increment, field.iteration_count);
  require_estimate_regime(cs);
  if (deltas.empty()) throw ValidationError("measure harness needs at least one delta");
  EstimateReport rep;
  rep.kind = "measure";
  rep.regime = cs.regime.kind;
  rep.gamma = cs.gamma;
  rep.slack = slack;
  rep.predicted_exponent = cs.gamma / (2.0 - cs.gamma);
  rep.predicted_x_exponent = rep.predicted_exponent;
  std::vector<double> sizes, dws, dxs;
  for (double delta : deltas) {
    const auto g = measure_perturbation_gap(field, cs, sc, delta);
    const double bound = std::max(delta, std::pow(delta, rep.predicted_exponent));
    EstimateRow row;
    row.perturbation_size = delta;
    row.ratio_W = bound > 0.0 ? g.sup_w / bound : 0.0;
    row.ratio_X = bound > 0.0 ? g.sup_x / bound : 0.0;
    rep.rows.push_back(row);
    sizes.push_back(delta);
    dws.push_back(g.sup_w);
    dxs.push_back(g.sup_x);
  }
  finish(rep, sizes, dws, dxs);
  return rep;
}

double field_spatial_lipschitz(const Field& field, double t, const EmpiricalMeasure& mu, double lo, double hi,
                               std::size_t n) {
  if (n < 2 || !(hi > lo)) throw ValidationError("Lipschitz stencil needs n >= 2 and hi > lo");
  const std::size_t d = field.dim();
  const double h = (hi - lo) / static_cast<double>(n - 1);
  std::vector<double> xs(d * n * d, 0.0), w(xs.size());
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t i = 0; i < n; ++i) xs[(c * n + i) * d + c] = lo + h * static_cast<double>(i);
  field.evaluate(t, xs, mu, w);
  double best = 0.0;
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t i = 0; i + 1 < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double dw = w[(c * n + i + 1) * d + j] - w[(c * n + i) * d + j];
        s += dw * dw;
      }
      best = std::max(best, std::sqrt(s) / h);
    }
  return best;
}

std::string estimate_to_csv(const EstimateReport& report) {
  std::string out = "perturbation_size,ratio_W,ratio_X,fitted_exponent\n";
  for (const auto& r : report.rows)
    out += io::fmt(r.perturbation_size) + "," + io::fmt(r.ratio_W) + "," + io::fmt(r.ratio_X) + "," +
           io::fmt(r.fitted_exponent) + "\n";
  return out;
}

}  // namespace mfg
