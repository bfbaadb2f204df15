#include <cmath>
#include <numbers>
#include <vector>

#include "mfg/error.hpp"
#include "mfg/measures.hpp"
#include "mfg/parallel.hpp"
#include "mfg/simd/kernels.hpp"

namespace mfg {
namespace {

struct KdeTerms {
  double density;                 // leave-one-out kernel density at x_i
  std::vector<double> score;      // grad log density at x_i
};

// Kernel sums at atom i excluding the atom itself.
KdeTerms kde_at(const EmpiricalMeasure& mu, std::size_t i, double h, std::vector<double>& buf) {
  const std::size_t n = mu.size(), d = mu.dim();
  const double c = 0.5 / (h * h);
  const auto& k = simd::active();
  auto pts = mu.points();
  auto w = mu.weights();
  double s0 = 0.0;
  std::vector<double> s1(d, 0.0);
  if (d == 1) {
    double a0, a1, b0, b1;
    const double xi = pts[i];
    k.gauss_sums(xi, pts.data(), w.data(), c, i, &a0, &a1);
    k.gauss_sums(xi, pts.data() + i + 1, w.data() + i + 1, c, n - i - 1, &b0, &b1);
    s0 = a0 + b0;
    s1[0] = a1 + b1;
  } else {
    buf.resize(n);
    auto xi = mu.point(i);
    for (std::size_t j = 0; j < n; ++j) {
      double r2 = 0.0;
      for (std::size_t cc = 0; cc < d; ++cc) {
        const double t = pts[j * d + cc] - xi[cc];
        r2 += t * t;
      }
      buf[j] = -c * r2;
    }
    k.exp_nonpositive(buf.data(), buf.data(), n);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double kw = w[j] * buf[j];
      s0 += kw;
      for (std::size_t cc = 0; cc < d; ++cc) s1[cc] += kw * (pts[j * d + cc] - xi[cc]);
    }
  }
  const double rest = 1.0 - w[i];
  const double norm = std::pow(2.0 * std::numbers::pi * h * h, -0.5 * static_cast<double>(d));
  KdeTerms out;
  out.density = rest > 0.0 ? norm * s0 / rest : 0.0;
  out.score.resize(d);
  for (std::size_t cc = 0; cc < d; ++cc) out.score[cc] = s0 > 0.0 ? s1[cc] / (h * h * s0) : 0.0;
  return out;
}

template <class Reduce>
double kde_functional(const EmpiricalMeasure& mu, double bandwidth, Reduce reduce) {
  if (!(bandwidth > 0.0)) throw ValidationError("bandwidth must be positive");
  if (mu.size() < 2) throw ValidationError("density estimate needs at least 2 atoms");
  std::vector<double> terms(mu.size());
  parallel_for(mu.size(), [&](std::size_t i) {
    thread_local std::vector<double> buf;
    terms[i] = mu.weight(i) * reduce(kde_at(mu, i, bandwidth, buf));
  });
  double acc = 0.0;
  for (double t : terms) acc += t;
  return acc;
}

}  // namespace

double silverman_bandwidth(const EmpiricalMeasure& mu) {
  double sw2 = 0.0;
  for (double w : mu.weights()) sw2 += w * w;
  const double n = 1.0 / sw2;
  const double d = static_cast<double>(mu.dim());
  if (!(mu.spread() > 0.0)) throw ValidationError("bandwidth rule needs a non-degenerate cloud");
  return std::pow(4.0 / (d + 2.0), 1.0 / (d + 4.0)) * std::pow(n, -1.0 / (d + 4.0)) * mu.spread();
}

double entropy_kde(const EmpiricalMeasure& mu, double bandwidth) {
  return kde_functional(mu, bandwidth, [](const KdeTerms& t) { return std::log(std::max(t.density, 1e-300)); });
}

double fisher_kde(const EmpiricalMeasure& mu, double bandwidth) {
  return kde_functional(mu, bandwidth, [](const KdeTerms& t) {
    double s = 0.0;
    for (double g : t.score) s += g * g;
    return s;
  });
}

}  // namespace mfg
