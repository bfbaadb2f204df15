#pragma once

// Reference computations the library results are checked against. None of
// them call into the code path they check.

#include <functional>
#include <span>
#include <vector>

#include "mfg/measures.hpp"
#include "mfg/oracle_lq.hpp"

namespace mfg::testing {

struct BruteForceMatch {
  double cost = 0.0;
  std::vector<std::size_t> perm;
};

/// Minimum over all n! permutations of (1/n) sum_i |x_i - y_perm(i)|^2, summed in index order.
BruteForceMatch brute_force_matching(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// y with y + eps f(y) = x for an increasing scalar f, by bisection to machine precision.
double bisection_resolvent(const std::function<double(double)>& f, double eps, double x);

/// Linear field W(tau, x, m) = alpha(tau) x + beta(tau) mean(m), tabulated on tau = j dt.
struct LinearField {
  std::vector<double> alpha, beta;
};

/// One application of the discrete psi operator (explicit Euler, left-point G) to a linear input
/// field for LQ data, propagated in closed form on the coefficients of (x, mean).
LinearField lq_psi_sweep(const LQParams& p, const LinearField& in, double dt);

/// Fixed point of lq_psi_sweep started from W0.
LinearField lq_discrete_fixed_point(const LQParams& p, double dt, int iterations);

/// Largest |dW/dt + W dW/dx + dW/dmean <W(t,.,m)>_m - sigma d2W/dx2 - G| over a (t, x, mean) grid,
/// derivatives by central differences of the field.
double master_equation_residual(const Field& W, const LQParams& p, double sigma_x, std::span<const double> ts,
                                std::span<const double> xs, std::span<const double> means);

}  // namespace mfg::testing
