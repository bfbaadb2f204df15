#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mfg/error.hpp"
#include "mfg/measures.hpp"

namespace mfg {
namespace {

constexpr std::size_t kAssignmentLimit = 64;
constexpr std::size_t kSinkhornLimit = 25'000'000;

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double t = a[c] - b[c];
    s += t * t;
  }
  return s;
}

std::vector<std::size_t> sorted_order(const EmpiricalMeasure& mu) {
  std::vector<std::size_t> idx(mu.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto pts = mu.points();
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return pts[a] < pts[b]; });
  return idx;
}

bool equal_uniform(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  return mu.is_uniform() && nu.is_uniform() && mu.size() == nu.size();
}

std::vector<std::size_t> sorted_matching(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  const auto a = sorted_order(mu);
  const auto b = sorted_order(nu);
  std::vector<std::size_t> perm(mu.size());
  for (std::size_t k = 0; k < a.size(); ++k) perm[a[k]] = b[k];
  return perm;
}

std::vector<std::size_t> assignment_matching(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  const std::size_t n = mu.size();
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = sq_dist(mu.point(i), nu.point(j));
  return solve_assignment(cost, n);
}

// northwest corner rule on sorted atoms: the monotone (quantile) coupling in d=1
std::vector<double> quantile_plan(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  const auto a = sorted_order(mu);
  const auto b = sorted_order(nu);
  std::vector<double> plan(mu.size() * nu.size(), 0.0);
  std::size_t i = 0, j = 0;
  double ra = mu.weight(a[0]), rb = nu.weight(b[0]);
  while (i < a.size() && j < b.size()) {
    const double m = std::min(ra, rb);
    plan[a[i] * nu.size() + b[j]] += m;
    ra -= m;
    rb -= m;
    if (ra <= rb) {
      if (++i < a.size()) ra += mu.weight(a[i]);
    } else {
      if (++j < b.size()) rb += nu.weight(b[j]);
    }
  }
  return plan;
}

std::vector<double> sinkhorn_plan(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  const std::size_t n = mu.size(), m = nu.size();
  if (n * m > kSinkhornLimit) throw UnsupportedError("clouds too large for the approximate transport tier");
  std::vector<double> cost(n * m);
  double cmax = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      cost[i * m + j] = sq_dist(mu.point(i), nu.point(j));
      cmax = std::max(cmax, cost[i * m + j]);
    }
  if (cmax == 0.0) {
    std::vector<double> plan(n * m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) plan[i * m + j] = mu.weight(i) * nu.weight(j);
    return plan;
  }
  std::vector<double> loga(n), logb(m), f(n, 0.0), g(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) loga[i] = std::log(std::max(mu.weight(i), 1e-300));
  for (std::size_t j = 0; j < m; ++j) logb[j] = std::log(std::max(nu.weight(j), 1e-300));

  auto lse_row = [&](std::size_t i, double eps) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) hi = std::max(hi, (g[j] - cost[i * m + j]) / eps + logb[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += std::exp((g[j] - cost[i * m + j]) / eps + logb[j] - hi);
    return hi + std::log(s);
  };
  auto lse_col = [&](std::size_t j, double eps) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) hi = std::max(hi, (f[i] - cost[i * m + j]) / eps + loga[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp((f[i] - cost[i * m + j]) / eps + loga[i] - hi);
    return hi + std::log(s);
  };

  // epsilon scaling down to 1e-4 of the cost range
  const double eps_final = 1e-4 * cmax;
  for (double eps = cmax; ; eps = std::max(eps * 0.5, eps_final)) {
    for (int it = 0; it < 500; ++it) {
      for (std::size_t i = 0; i < n; ++i) f[i] = -eps * lse_row(i, eps);
      double err = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double gj = -eps * lse_col(j, eps);
        err = std::max(err, std::fabs(gj - g[j]));
        g[j] = gj;
      }
      if (err < 1e-12 * cmax) break;
    }
    if (eps == eps_final) {
      std::vector<double> plan(n * m);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
          plan[i * m + j] = std::exp((f[i] + g[j] - cost[i * m + j]) / eps + loga[i] + logb[j]);
      return plan;
    }
  }
}

double plan_cost(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const std::vector<double>& plan) {
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < nu.size(); ++j) {
      const double p = plan[i * nu.size() + j];
      if (p != 0.0) s += p * sq_dist(mu.point(i), nu.point(j));
    }
  return s;
}

void check_dims(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.dim() != nu.dim())
    throw DimensionError("wasserstein2: dimension " + std::to_string(mu.dim()) + " vs " + std::to_string(nu.dim()));
}

}  // namespace

std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
  // shortest augmenting path with row/column potentials, 1-based internally
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 1; j <= n; ++j) perm[p[j] - 1] = j - 1;
  return perm;
}

double matching_cost(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, std::span<const std::size_t> perm) {
  double s = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) s += sq_dist(mu.point(i), nu.point(perm[i]));
  return s / static_cast<double>(perm.size());
}

W2Result wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  check_dims(mu, nu);
  if (equal_uniform(mu, nu) && mu.dim() == 1)
    return {std::sqrt(matching_cost(mu, nu, sorted_matching(mu, nu))), true, "sorted"};
  if (mu.dim() == 1) return {std::sqrt(plan_cost(mu, nu, quantile_plan(mu, nu))), true, "quantile"};
  if (equal_uniform(mu, nu) && mu.size() <= kAssignmentLimit)
    return {std::sqrt(matching_cost(mu, nu, assignment_matching(mu, nu))), true, "assignment"};
  return {std::sqrt(plan_cost(mu, nu, sinkhorn_plan(mu, nu))), false, "sinkhorn"};
}

Coupling optimal_coupling(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  check_dims(mu, nu);
  std::vector<double> plan;
  if (equal_uniform(mu, nu) && (mu.dim() == 1 || mu.size() <= kAssignmentLimit)) {
    const auto perm = mu.dim() == 1 ? sorted_matching(mu, nu) : assignment_matching(mu, nu);
    plan.assign(mu.size() * nu.size(), 0.0);
    for (std::size_t i = 0; i < perm.size(); ++i) plan[i * nu.size() + perm[i]] = mu.weight(i);
  } else if (mu.dim() == 1) {
    plan = quantile_plan(mu, nu);
  } else {
    plan = sinkhorn_plan(mu, nu);
  }
  return {mu, nu, std::move(plan)};
}

}  // namespace mfg
