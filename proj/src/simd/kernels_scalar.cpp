#include <algorithm>
#include <cmath>

#include "mfg/simd/kernels.hpp"

namespace mfg::simd {
namespace {

double sum_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double sum_squares_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void interp_linear_scalar(const UniformGrid& g, const double* v, const double* xs, double* out,
                          std::size_t n) {
  if (g.n == 1) {
    std::fill(out, out + n, v[0]);
    return;
  }
  const double inv = 1.0 / g.step;
  const double last = static_cast<double>(g.n - 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = (xs[i] - g.lo) * inv;
    // fmax/fmin drop NaN, so a NaN input lands on cell 0 and stays NaN through f.
    const double cell = std::fmin(std::fmax(std::floor(s), 0.0), last);
    const auto k = static_cast<std::size_t>(cell);
    const double f = s - cell;
    out[i] = v[k] + f * (v[k + 1] - v[k]);
  }
}

void euler_update_scalar(double* x, const double* drift, const double* noise, double dt, double scale,
                         std::size_t n) {
  if (noise == nullptr || scale == 0.0) {
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] - drift[i] * dt;
    return;
  }
  for (std::size_t i = 0; i < n; ++i) x[i] = x[i] - drift[i] * dt + scale * noise[i];
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void gauss_sums_scalar(double xi, const double* xs, const double* w, double c, std::size_t n, double* s0,
                       double* s1) {
  double a0 = 0.0, a1 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = xs[j] - xi;
    const double k = w[j] * std::exp(-c * d * d);
    a0 += k;
    a1 += k * d;
  }
  *s0 = a0;
  *s1 = a1;
}

void exp_nonpositive_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{"scalar",           sum_scalar,         sum_squares_scalar,
                             dot_scalar,         interp_linear_scalar, euler_update_scalar,
                             axpy_scalar,        gauss_sums_scalar,  exp_nonpositive_scalar};
  return t;
}

}  // namespace mfg::simd
