// Compiled with -mavx2 -mfma; only reached after a CPUID check.
#include <immintrin.h>

#include <algorithm>
#include <cmath>

#define MFG_DECLARE_AVX2 1
#include "mfg/simd/kernels.hpp"

namespace mfg::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// exp on x <= 0. Cephes range reduction + (3,3) Pade form, ~1 ulp.
// Inputs below -708 flush to zero, which keeps 2^n a normal number.
inline __m256d exp_nonpos(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
  const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
  const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
  const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
  const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
  const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
  const __m256d q3 = _mm256_set1_pd(2.00000000000000000009e0);
  const __m256d floor_arg = _mm256_set1_pd(-708.0);

  const __m256d underflow = _mm256_cmp_pd(x, floor_arg, _CMP_LT_OQ);
  x = _mm256_max_pd(x, floor_arg);
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);
  const __m256d rr = _mm256_mul_pd(r, r);
  __m256d p = _mm256_fmadd_pd(p0, rr, p1);
  p = _mm256_fmadd_pd(p, rr, p2);
  p = _mm256_mul_pd(p, r);
  __m256d q = _mm256_fmadd_pd(q0, rr, q1);
  q = _mm256_fmadd_pd(q, rr, q2);
  q = _mm256_fmadd_pd(q, rr, q3);
  __m256d e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));
  // 2^n: place n + 1023 in the exponent field.
  const __m256d biased = _mm256_add_pd(n, _mm256_set1_pd(1023.0 + 4503599627370496.0));
  const __m256d scale = _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_castpd_si256(biased), 52));
  return _mm256_andnot_pd(underflow, _mm256_mul_pd(e, scale));
}

double sum_avx2(const double* x, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
    a1 = _mm256_add_pd(a1, _mm256_loadu_pd(x + i + 4));
  }
  for (; i + 4 <= n; i += 4) a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += x[i];
  return s;
}

double sum_squares_avx2(const double* x, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d v0 = _mm256_loadu_pd(x + i);
    const __m256d v1 = _mm256_loadu_pd(x + i + 4);
    a0 = _mm256_fmadd_pd(v0, v0, a0);
    a1 = _mm256_fmadd_pd(v1, v1, a1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    a0 = _mm256_fmadd_pd(v, v, a0);
  }
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
  }
  for (; i + 4 <= n; i += 4) a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void interp_linear_avx2(const UniformGrid& g, const double* v, const double* xs, double* out, std::size_t n) {
  if (g.n == 1) {
    std::fill(out, out + n, v[0]);
    return;
  }
  const double inv_s = 1.0 / g.step;
  const double last_s = static_cast<double>(g.n - 2);
  const __m256d lo = _mm256_set1_pd(g.lo);
  const __m256d inv = _mm256_set1_pd(inv_s);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d last = _mm256_set1_pd(last_s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d s = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(xs + i), lo), inv);
    // max_pd returns the second operand when the first is NaN.
    const __m256d cell = _mm256_min_pd(_mm256_max_pd(_mm256_floor_pd(s), zero), last);
    const __m128i k = _mm256_cvttpd_epi32(cell);
    const __m256d v0 = _mm256_i32gather_pd(v, k, 8);
    const __m256d v1 = _mm256_i32gather_pd(v + 1, k, 8);
    const __m256d f = _mm256_sub_pd(s, cell);
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(f, _mm256_sub_pd(v1, v0), v0));
  }
  for (; i < n; ++i) {
    const double s = (xs[i] - g.lo) * inv_s;
    const double cell = std::fmin(std::fmax(std::floor(s), 0.0), last_s);
    const auto k = static_cast<std::size_t>(cell);
    out[i] = std::fma(s - cell, v[k + 1] - v[k], v[k]);
  }
}

void euler_update_avx2(double* x, const double* drift, const double* noise, double dt, double scale,
                       std::size_t n) {
  const __m256d vdt = _mm256_set1_pd(dt);
  std::size_t i = 0;
  if (noise == nullptr || scale == 0.0) {
    for (; i + 4 <= n; i += 4)
      _mm256_storeu_pd(x + i, _mm256_fnmadd_pd(_mm256_loadu_pd(drift + i), vdt, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] = std::fma(-drift[i], dt, x[i]);
    return;
  }
  const __m256d vs = _mm256_set1_pd(scale);
  for (; i + 4 <= n; i += 4) {
    __m256d r = _mm256_fnmadd_pd(_mm256_loadu_pd(drift + i), vdt, _mm256_loadu_pd(x + i));
    r = _mm256_fmadd_pd(vs, _mm256_loadu_pd(noise + i), r);
    _mm256_storeu_pd(x + i, r);
  }
  for (; i < n; ++i) x[i] = std::fma(scale, noise[i], std::fma(-drift[i], dt, x[i]));
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void gauss_sums_avx2(double xi, const double* xs, const double* w, double c, std::size_t n, double* s0,
                     double* s1) {
  const __m256d vx = _mm256_set1_pd(xi);
  const __m256d vnc = _mm256_set1_pd(-c);
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(xs + j), vx);
    const __m256d k = _mm256_mul_pd(_mm256_loadu_pd(w + j), exp_nonpos(_mm256_mul_pd(vnc, _mm256_mul_pd(d, d))));
    a0 = _mm256_add_pd(a0, k);
    a1 = _mm256_fmadd_pd(k, d, a1);
  }
  double r0 = hsum(a0), r1 = hsum(a1);
  if (j < n) {
    alignas(32) double tail_x[4] = {0, 0, 0, 0}, tail_w[4] = {0, 0, 0, 0}, e[4];
    for (std::size_t t = 0; j + t < n; ++t) {
      tail_x[t] = xs[j + t] - xi;
      tail_w[t] = w[j + t];
    }
    const __m256d d = _mm256_load_pd(tail_x);
    _mm256_store_pd(e, exp_nonpos(_mm256_mul_pd(vnc, _mm256_mul_pd(d, d))));
    for (std::size_t t = 0; j + t < n; ++t) {
      const double k = tail_w[t] * e[t];
      r0 += k;
      r1 += k * tail_x[t];
    }
  }
  *s0 = r0;
  *s1 = r1;
}

void exp_nonpositive_avx2(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp_nonpos(_mm256_loadu_pd(x + i)));
  if (i < n) {
    alignas(32) double buf[4] = {0, 0, 0, 0};
    for (std::size_t t = 0; i + t < n; ++t) buf[t] = x[i + t];
    _mm256_store_pd(buf, exp_nonpos(_mm256_load_pd(buf)));
    for (std::size_t t = 0; i + t < n; ++t) out[i + t] = buf[t];
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable t{"avx2",          sum_avx2,       sum_squares_avx2,
                             dot_avx2,        interp_linear_avx2, euler_update_avx2,
                             axpy_avx2,       gauss_sums_avx2, exp_nonpositive_avx2};
  return t;
}

}  // namespace mfg::simd
