#include "mfg/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "mfg/error.hpp"
#include "mfg/parallel.hpp"

namespace mfg {

ZValue z_functional_with_error(const Field& W1, const Field& W2, double t, const EmpiricalMeasure& X,
                               const EmpiricalMeasure& Y) {
  if (X.dim() != Y.dim()) throw DimensionError("z functional needs clouds of equal dimension");
  if (X.size() != Y.size()) throw DimensionError("z functional needs clouds of equal size");
  if (W1.dim() != X.dim() || W2.dim() != X.dim()) throw DimensionError("field dimension differs from the clouds");
  for (std::size_t i = 0; i < X.size(); ++i)
    if (X.weight(i) != Y.weight(i)) throw ValidationError("paired clouds must carry the same weights");
  const std::size_t n = X.points().size(), d = X.dim();
  std::vector<double> a(n), b(n), ea(n), eb(n);
  W1.evaluate(t, X.points(), X, a);
  W2.evaluate(t, Y.points(), Y, b);
  W1.evaluate_stderr(t, X.points(), X, ea);
  W2.evaluate_stderr(t, Y.points(), Y, eb);
  ZValue z;
  for (std::size_t i = 0; i < X.size(); ++i) {
    double s = 0.0, e = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double dx = X.points()[i * d + c] - Y.points()[i * d + c];
      s += (a[i * d + c] - b[i * d + c]) * dx;
      e += (ea[i * d + c] + eb[i * d + c]) * std::fabs(dx);
    }
    z.value += X.weight(i) * s;
    z.stderr += X.weight(i) * e;
  }
  return z;
}

double z_functional(const Field& W1, const Field& W2, double t, const EmpiricalMeasure& X, const EmpiricalMeasure& Y) {
  return z_functional_with_error(W1, W2, t, X, Y).value;
}

ZReport propagation_check(const Field& W1, const Field& W2, const std::vector<double>& times,
                          const SamplerSpec& sampler, std::size_t n_pairs, std::uint64_t seed) {
  if (times.empty()) throw ValidationError("propagation check needs at least one time");
  if (n_pairs == 0) throw ValidationError("propagation check needs at least one pair");
  if (sampler.dim != W1.dim()) throw DimensionError("sampler dimension differs from the field");
  const std::size_t nt = times.size();
  std::vector<double> z(n_pairs * nt), se(n_pairs * nt);
  parallel_for(n_pairs, [&](std::size_t i) {
    const auto [X, Y] = sample_cloud_pair(sampler, seed, i);
    for (std::size_t j = 0; j < nt; ++j) {
      const auto v = z_functional_with_error(W1, W2, times[j], X, Y);
      z[i * nt + j] = v.value;
      se[i * nt + j] = v.stderr;
    }
  });
  ZReport rep;
  rep.times = times;
  rep.min_by_time.assign(nt, std::numeric_limits<double>::infinity());
  rep.min_value = std::numeric_limits<double>::infinity();
  rep.n_samples = n_pairs * nt;
  double max_se = 0.0;
  for (std::size_t i = 0; i < n_pairs; ++i)
    for (std::size_t j = 0; j < nt; ++j) {
      const double v = z[i * nt + j];
      if (!std::isfinite(v)) throw SimulationError("non-finite z functional", times[j], i);
      max_se = std::max(max_se, se[i * nt + j]);
      rep.min_by_time[j] = std::min(rep.min_by_time[j], v);
      if (v < rep.min_value) {
        rep.min_value = v;
        rep.argmin_time = times[j];
        rep.argmin_pair_index = i;
        rep.argmin_pair_seed = pair_seed(seed, i);
      }
    }
  rep.tolerance_used = 3.0 * max_se + 1e-10;
  rep.passed = rep.min_value >= -rep.tolerance_used;
  return rep;
}

ZReport propagation_check(const Field& field, const std::vector<double>& times, const SamplerSpec& sampler,
                          std::size_t n_pairs, std::uint64_t seed) {
  return propagation_check(field, field, times, sampler, n_pairs, seed);
}

std::string z_report_to_json(const ZReport& r) {
  nlohmann::json j;
  j["min_value"] = r.min_value;
  j["argmin"] = {{"t", r.argmin_time}, {"pair_index", r.argmin_pair_index}, {"pair_seed", r.argmin_pair_seed}};
  j["n_samples"] = r.n_samples;
  j["tolerance_used"] = r.tolerance_used;
  j["passed"] = r.passed;
  j["times"] = r.times;
  j["min_by_time"] = r.min_by_time;
  return j.dump(2) + "\n";
}

double phi_value(const PhiParams& phi, double t, const EmpiricalMeasure& m) {
  if (m.dim() % 2 != 0) throw DimensionError("phi needs a measure on an even-dimensional space");
  const std::size_t d = m.dim() / 2;
  double integral = 0.0;
  if (phi.f)
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto p = m.point(i);
      integral += m.weight(i) * phi.f(p.first(d), p.subspan(d));
    }
  const double e3 = moment(marginal(m, Marginal::First), 3.0) + moment(marginal(m, Marginal::Second), 3.0);
  return phi.psi_value + integral - phi.alpha * std::exp(phi.lambda * t) * e3;
}

double entropy_penalized_value(const Field& W, const MeasureMap& V, double t, const EmpiricalMeasure& m,
                               const PhiParams& phi, double kappa, double bandwidth) {
  if (m.dim() % 2 != 0) throw DimensionError("entropy-penalized value needs a measure on R^{2d}");
  if (!(kappa >= 0.0)) throw ValidationError("kappa must be nonnegative");
  const std::size_t d = m.dim() / 2;
  if (W.dim() != d) throw DimensionError("field dimension differs from half the measure dimension");
  const auto mx = marginal(m, Marginal::First);
  const auto my = marginal(m, Marginal::Second);
  std::vector<double> xs(m.size() * d), ys(m.size() * d);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto p = m.point(i);
    std::copy_n(p.begin(), d, xs.begin() + static_cast<std::ptrdiff_t>(i * d));
    std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(d), d, ys.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  std::vector<double> wx(xs.size()), vy(ys.size());
  W.evaluate(t, xs, mx, wx);
  V.apply(ys, my, vy);
  double z = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += (wx[i * d + c] - vy[i * d + c]) * (xs[i * d + c] - ys[i * d + c]);
    z += m.weight(i) * s;
  }
  double value = z - phi_value(phi, t, m);
  if (kappa > 0.0) value += kappa * entropy_kde(m, bandwidth > 0.0 ? bandwidth : silverman_bandwidth(m));
  return value;
}

}  // namespace mfg
