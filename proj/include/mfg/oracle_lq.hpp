#pragma once

#include <string>
#include <vector>

#include "mfg/coefficients.hpp"
#include "mfg/field.hpp"

namespace mfg {

/// F = u, G = q x + q_bar mean(mu), W0 = p x + p_bar mean(mu), scalar.
struct LQParams {
  double p = 0.0, p_bar = 0.0;
  double q = 0.0, q_bar = 0.0;
  double T = 1.0;

  bool monotone() const { return p >= 0.0 && p + p_bar >= 0.0 && q >= 0.0 && q + q_bar >= 0.0; }
};

LQParams lq_params_from(const CoefficientSet& cs, double T);

/// W(t, x, mu) = a(t) x + b(t) mean(mu).
struct RiccatiPath {
  LQParams params;
  std::vector<double> t, a, b;
  std::vector<double> c;  // shifted system; empty unless solved

  /// Cubic Hermite with ODE slopes; exact at grid times.
  double a_at(double s) const;
  double b_at(double s) const;
  double c_at(double s) const;
};

/// a' = q - a^2, b' = q_bar - 2ab - b^2 by classical RK4; BlowUpError when |a| or |b| exceeds 1e8.
RiccatiPath riccati_solve(const LQParams& params, double dt);
/// Adds c' = q + q_bar - (a + b) c, c(0) = p + p_bar: the slope of W in a common translation.
RiccatiPath riccati_solve_shifted(const LQParams& params, double dt);

FieldPtr oracle_field(const LQParams& params, double dt);
FieldPtr oracle_field(const RiccatiPath& path);

std::string riccati_to_csv(const RiccatiPath& path);

}  // namespace mfg
