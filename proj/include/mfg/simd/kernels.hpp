#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference version and,
// on x86-64, an AVX2/FMA version; the active table is picked once at runtime
// from CPUID (MFG_SIMD=scalar forces the reference path).

#include <cstddef>
#include <span>

namespace mfg::simd {

enum class Isa { Scalar, Avx2 };

/// n nodes at lo, lo + step, ... ; n == 1 means a constant.
struct UniformGrid {
  double lo = 0.0;
  double step = 1.0;
  std::size_t n = 1;
};

struct KernelTable {
  const char* name;
  double (*sum)(const double* x, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  // Piecewise-linear interpolation, linear extrapolation past both ends.
  void (*interp_linear)(const UniformGrid& grid, const double* values, const double* xs, double* out,
                        std::size_t n);
  // x <- x - drift*dt + noise_scale*noise   (noise may be null when noise_scale == 0)
  void (*euler_update)(double* x, const double* drift, const double* noise, double dt,
                       double noise_scale, std::size_t n);
  // y <- y + a*x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // s0 = sum_j w_j exp(-c (x_j - xi)^2),  s1 = sum_j w_j (x_j - xi) exp(-c (x_j - xi)^2)
  void (*gauss_sums)(double xi, const double* xs, const double* w, double c, std::size_t n, double* s0,
                     double* s1);
  // out_j = exp(x_j) for x_j <= 0
  void (*exp_nonpositive)(const double* x, double* out, std::size_t n);
};

const KernelTable& scalar_table();
#if defined(MFG_HAVE_AVX2) || defined(MFG_DECLARE_AVX2)
const KernelTable& avx2_table();
#endif

bool available(Isa isa);
const KernelTable& table(Isa isa);
const KernelTable& active();
Isa active_isa();
const char* isa_name(Isa isa);

inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }
inline double sum_squares(std::span<const double> x) { return active().sum_squares(x.data(), x.size()); }
inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}
inline void interp_linear(const UniformGrid& g, std::span<const double> values, std::span<const double> xs,
                          std::span<double> out) {
  active().interp_linear(g, values.data(), xs.data(), out.data(), xs.size());
}
inline void euler_update(std::span<double> x, std::span<const double> drift, std::span<const double> noise,
                         double dt, double noise_scale) {
  active().euler_update(x.data(), drift.data(), noise.empty() ? nullptr : noise.data(), dt, noise_scale,
                        x.size());
}
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}

}  // namespace mfg::simd
