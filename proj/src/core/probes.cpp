#include <algorithm>
#include <cmath>
#include <limits>

#include "mfg/coefficients.hpp"
#include "mfg/error.hpp"
#include "mfg/parallel.hpp"

namespace mfg {
namespace {

constexpr double kDegenerate = 1e-24;  // squared lifted norm floor (1e-12 in norm)
constexpr int kMaxResample = 64;

std::vector<double> normals(RngStream& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

// Perturbation patterns: independent, rigid translation, mean-zero difference, small.
std::vector<double> partner_points(const SamplerSpec& spec, RngStream& rng, std::span<const double> x, int kind) {
  const std::size_t d = spec.dim, n = spec.atoms;
  std::vector<double> y(x.begin(), x.end());
  switch (kind) {
    case 0:
      return sample_points(spec, rng, n);
    case 1: {
      const auto c = normals(rng, d, 1.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) y[i * d + k] += c[k];
      return y;
    }
    case 2: {
      auto z = normals(rng, n * d, 1.0);
      std::vector<double> zm(d, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) zm[k] += z[i * d + k] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) y[i * d + k] += z[i * d + k] - zm[k];
      return y;
    }
    default: {
      const auto z = normals(rng, n * d, 1e-3);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += z[i];
      return y;
    }
  }
}

double diff_norm_sq(std::span<const double> a, std::span<const double> b, std::span<const double> w, std::size_t d) {
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  return lifted_norm_sq(diff, w, d);
}

std::vector<double> minus(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

MonotonicityReport min_report(const std::vector<double>& q, std::uint64_t seed, double tol) {
  MonotonicityReport r;
  r.n_pairs = q.size();
  r.tolerance = tol;
  r.min_quotient = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q[i] < r.min_quotient) {
      r.min_quotient = q[i];
      r.worst_pair_index = i;
    }
  r.worst_pair_seed = pair_seed(seed, r.worst_pair_index);
  r.passed = r.min_quotient >= -tol;
  return r;
}

void need_pairs(std::size_t n) {
  if (n < 1) throw ValidationError("probe needs at least one pair");
}

struct JointSample {
  double dx2, du2, joint;
};

JointSample joint_sample(const ControlMap& f, const ControlMap& g, const SamplerSpec& sampler, std::uint64_t seed,
                         std::size_t i) {
  auto [a, b] = sample_lifted_pair(sampler, seed, i);
  const std::size_t d = sampler.dim;
  auto w = a.x_cloud.weights();
  const auto fa = f(a.x_cloud.points(), a.x_cloud, a.u_values);
  const auto fb = f(b.x_cloud.points(), b.x_cloud, b.u_values);
  const auto ga = g(a.x_cloud.points(), a.x_cloud, a.u_values);
  const auto gb = g(b.x_cloud.points(), b.x_cloud, b.u_values);
  const auto dx = minus(a.x_cloud.points(), b.x_cloud.points());
  const auto du = minus(a.u_values, b.u_values);
  const double joint = lifted_inner(minus(fa, fb), du, w, d) + lifted_inner(minus(ga, gb), dx, w, d);
  return {lifted_norm_sq(dx, w, d), lifted_norm_sq(du, w, d), joint};
}

}  // namespace

std::uint64_t pair_seed(std::uint64_t seed, std::size_t index) {
  return mix64(seed ^ mix64(static_cast<std::uint64_t>(index) + 0x51afd6c1d1a3b2c7ULL));
}

std::pair<EmpiricalMeasure, EmpiricalMeasure> sample_cloud_pair(const SamplerSpec& spec, std::uint64_t seed,
                                                                std::size_t index) {
  RngStream rng(CounterRng(pair_seed(seed, index), 0));
  const int kind = static_cast<int>(index % 4);
  for (int attempt = 0; attempt < kMaxResample; ++attempt) {
    auto x = sample_points(spec, rng, spec.atoms);
    auto y = partner_points(spec, rng, x, kind);
    auto X = EmpiricalMeasure::uniform(spec.dim, std::move(x));
    if (diff_norm_sq(X.points(), y, X.weights(), spec.dim) < kDegenerate) continue;
    return {std::move(X), EmpiricalMeasure::uniform(spec.dim, std::move(y))};
  }
  throw ValidationError("sampler keeps producing coincident clouds");
}

std::pair<LiftedSample, LiftedSample> sample_lifted_pair(const SamplerSpec& spec, std::uint64_t seed,
                                                         std::size_t index) {
  RngStream rng(CounterRng(pair_seed(seed, index), 0));
  const std::size_t n = spec.atoms * spec.dim;
  const int kind = static_cast<int>(index % 7);
  for (int attempt = 0; attempt < kMaxResample; ++attempt) {
    auto x = sample_points(spec, rng, spec.atoms);
    auto u = normals(rng, n, spec.u_scale);
    std::vector<double> y, v;
    if (kind < 4) {
      y = partner_points(spec, rng, x, kind);
      v = normals(rng, n, spec.u_scale);
    } else if (kind == 4) {  // dU = 0
      y = partner_points(spec, rng, x, static_cast<int>((index / 7) % 4));
      v = u;
    } else if (kind == 5) {  // dX = 0
      y = x;
      v = normals(rng, n, spec.u_scale);
    } else {  // dU proportional to dX
      y = partner_points(spec, rng, x, static_cast<int>((index / 7) % 4));
      const double lambda = -2.0 + 4.0 * rng.uniform();
      v.resize(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = u[i] + lambda * (y[i] - x[i]);
    }
    auto X = EmpiricalMeasure::uniform(spec.dim, std::move(x));
    const double w = X.weight(0);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = X.points()[i] - y[i], du = u[i] - v[i];
      s += w * (dx * dx + du * du);
    }
    if (s < kDegenerate) continue;
    return {LiftedSample{std::move(X), std::move(u)},
            LiftedSample{EmpiricalMeasure::uniform(spec.dim, std::move(y)), std::move(v)}};
  }
  throw ValidationError("sampler keeps producing coincident pairs");
}

MonotonicityReport probe_l2_monotone(const MeasureMap& w0, const SamplerSpec& sampler, std::size_t n_pairs,
                                     std::uint64_t seed, double tolerance) {
  need_pairs(n_pairs);
  std::vector<double> q(n_pairs);
  parallel_for(n_pairs, [&](std::size_t i) {
    auto [x, y] = sample_cloud_pair(sampler, seed, i);
    const auto dw = minus(w0.lifted(x), w0.lifted(y));
    const auto dx = minus(x.points(), y.points());
    q[i] = lifted_inner(dw, dx, x.weights(), sampler.dim) / lifted_norm_sq(dx, x.weights(), sampler.dim);
  });
  return min_report(q, seed, tolerance);
}

MonotonicityReport probe_joint_monotone(const ControlMap& f, const ControlMap& g, const SamplerSpec& sampler,
                                        std::size_t n_pairs, std::uint64_t seed, double tolerance) {
  need_pairs(n_pairs);
  std::vector<double> q(n_pairs);
  parallel_for(n_pairs, [&](std::size_t i) {
    const auto s = joint_sample(f, g, sampler, seed, i);
    q[i] = s.joint / (s.dx2 + s.du2);
  });
  return min_report(q, seed, tolerance);
}

MonotonicityReport probe_terminal_coercivity(const MeasureMap& w0, const SamplerSpec& sampler, std::size_t n_pairs,
                                             std::uint64_t seed) {
  need_pairs(n_pairs);
  std::vector<double> q(n_pairs, std::numeric_limits<double>::infinity());
  parallel_for(n_pairs, [&](std::size_t i) {
    auto [x, y] = sample_cloud_pair(sampler, seed, i);
    const auto dw = minus(w0.lifted(x), w0.lifted(y));
    const auto dx = minus(x.points(), y.points());
    const double ww = lifted_norm_sq(dw, x.weights(), sampler.dim);
    if (ww >= kDegenerate) q[i] = lifted_inner(dw, dx, x.weights(), sampler.dim) / ww;
  });
  auto r = min_report(q, seed, 0.0);
  r.passed = std::isfinite(r.min_quotient) && r.min_quotient > 0.0;
  return r;
}

WeakStrongFit fit_weak_strong(const ControlMap& f, const ControlMap& g, const SamplerSpec& sampler,
                              std::size_t n_pairs, std::uint64_t seed, Direction direction) {
  if (n_pairs < 10) throw ValidationError("fit_weak_strong needs at least 10 pairs");
  std::vector<JointSample> s(n_pairs);
  parallel_for(n_pairs, [&](std::size_t i) { s[i] = joint_sample(f, g, sampler, seed, i); });

  // Constraint per sample, normalized to a + b = 1:  alpha*a - L*b <= j.
  struct Row {
    double a, b, j;
  };
  std::vector<Row> active;
  double l_min = 0.0;
  for (const auto& x : s) {
    const double tot = x.dx2 + x.du2;
    double a = x.dx2 / tot, b = x.du2 / tot;
    if (direction == Direction::InW) std::swap(a, b);
    const double j = x.joint / tot;
    if (a <= 1e-14) {
      if (b > 0.0) l_min = std::max(l_min, -j / b);
    } else {
      active.push_back({a, b, j});
    }
  }
  if (active.empty()) return {0.0, l_min};

  // Envelope value at |dX| = |dU|: phi(L) = max feasible alpha - L, concave in L.
  auto phi = [&](double L) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : active) best = std::min(best, (r.j + L * r.b) / r.a);
    return best - L;
  };
  double lo = l_min, hi = l_min + 100.0;
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double c1 = hi - ratio * (hi - lo), c2 = lo + ratio * (hi - lo);
  double f1 = phi(c1), f2 = phi(c2);
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    if (f1 >= f2) {
      hi = c2;
      c2 = c1;
      f2 = f1;
      c1 = hi - ratio * (hi - lo);
      f1 = phi(c1);
    } else {
      lo = c1;
      c1 = c2;
      f1 = f2;
      c2 = lo + ratio * (hi - lo);
      f2 = phi(c2);
    }
  }
  // the endpoint l_min often carries the maximum exactly
  double L = 0.5 * (lo + hi);
  if (phi(l_min) >= phi(L)) L = l_min;
  const double alpha = phi(L) + L;
  if (!(alpha > 0.0)) return {0.0, L};
  return {alpha, L};
}

double holder_norm_gamma(double a, double gamma) {
  if (!(a >= 0.0)) throw ValidationError("holder_norm_gamma: argument must be nonnegative");
  return std::max(a, std::pow(a, gamma));
}

bool certify_growth(const CoefficientSet& cs, const SamplerSpec& sampler, std::size_t n_samples, std::uint64_t seed) {
  const std::size_t d = cs.dim;
  const std::size_t per = std::max<std::size_t>(1, sampler.atoms);
  const std::size_t n_clouds = (n_samples + per - 1) / per;
  std::vector<char> ok(n_clouds, 1);
  parallel_for(n_clouds, [&](std::size_t c) {
    RngStream rng(CounterRng(pair_seed(seed, c), 1));
    auto x = sample_cloud(sampler, rng);
    const auto u = normals(rng, x.points().size(), sampler.u_scale);
    const double root_e2 = std::sqrt(x.second_moment());
    const auto fv = (*cs.F)(x.points(), x, u);
    const auto gv = (*cs.G)(x.points(), x, u);
    const auto wv = cs.W0->lifted(x);
    auto norm = [d](std::span<const double> v, std::size_t i) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += v[i * d + k] * v[i * d + k];
      return std::sqrt(s);
    };
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double nx = norm(x.points(), i), nu = norm(u, i);
      const double bound_fg = cs.growth_constant * (1.0 + nx + nu + root_e2) * (1.0 + 1e-12);
      const double bound_w = cs.growth_constant * (1.0 + nx + root_e2) * (1.0 + 1e-12);
      if (!(norm(fv, i) <= bound_fg && norm(gv, i) <= bound_fg && norm(wv, i) <= bound_w)) ok[c] = 0;
    }
  });
  return std::all_of(ok.begin(), ok.end(), [](char v) { return v != 0; });
}

double lifted_lipschitz_quotient(const MeasureMap& f, const SamplerSpec& sampler, std::size_t n_pairs,
                                 std::uint64_t seed) {
  need_pairs(n_pairs);
  std::vector<double> q(n_pairs);
  parallel_for(n_pairs, [&](std::size_t i) {
    auto [x, y] = sample_cloud_pair(sampler, seed, i);
    const auto df = minus(f.lifted(x), f.lifted(y));
    const auto dx = minus(x.points(), y.points());
    q[i] = std::sqrt(lifted_norm_sq(df, x.weights(), sampler.dim) / lifted_norm_sq(dx, x.weights(), sampler.dim));
  });
  return *std::max_element(q.begin(), q.end());
}

}  // namespace mfg
