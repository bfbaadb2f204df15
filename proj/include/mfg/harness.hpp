#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mfg/coefficients.hpp"
#include "mfg/solver.hpp"

namespace mfg {

struct EstimateRow {
  double perturbation_size = 0.0;
  double ratio_W = 0.0;
  double ratio_X = 0.0;
  double fitted_exponent = 0.0;
};

struct EstimateReport {
  std::string kind;  // "state" | "measure"
  std::vector<EstimateRow> rows;
  double fitted_exponent = 0.0;
  double predicted_exponent = 1.0;
  double fitted_x_exponent = 0.0;
  double predicted_x_exponent = 1.0;
  double slack = 0.2;
  double ratio_spread = 1.0;  // max/min ratio_W over rows
  bool passed = false;
  RegimeKind regime = RegimeKind::None;
  double gamma = 1.0;
};

/// Exponent of ||X0 - Y0|| in the bound on ||W_t^x - W_t^y||, per regime.
double predicted_w_exponent(RegimeKind kind, double gamma);
/// Exponent of ||X0 - Y0|| in the bound on ||X_t - Y_t||, per regime.
double predicted_x_exponent(RegimeKind kind, double gamma);
/// max(a, a^gamma).
double gamma_norm(double a, double gamma);

/// Least-squares slope of log y against log x over entries with x, y > 0.
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct StabilityOptions {
  std::vector<double> sizes{1e-1, 1e-2, 1e-3};
  double slack = 0.2;
  std::size_t reference = 0;
};

/// Coupled runs from X0 and X0 + delta e sharing the particle noise.
EstimateReport stability_harness(const DecouplingField& field, const CoefficientSet& cs, const SolverScenario& sc,
                                 const StabilityOptions& opts);
/// Same measurement on explicit initial-cloud pairs (flattened N x d each).
EstimateReport stability_harness(const Field& field, const CoefficientSet& cs, const SolverScenario& sc,
                                 const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs,
                                 double slack);

struct MeasureGap {
  double sup_w = 0.0;
  double sup_x = 0.0;
};

/// Frozen-flow FBSDE along the equilibrium flow and along its translate by delta e1.
MeasureGap measure_perturbation_gap(const Field& field, const CoefficientSet& cs, const SolverScenario& sc,
                                    double delta, std::size_t reference = 0);

EstimateReport measure_stability_harness(const DecouplingField& field, const CoefficientSet& cs,
                                         const SolverScenario& sc, const std::vector<double>& deltas, double slack);

/// Largest difference quotient of x -> W(t, x, mu) along each axis on a uniform stencil in [lo, hi].
double field_spatial_lipschitz(const Field& field, double t, const EmpiricalMeasure& mu, double lo, double hi,
                               std::size_t n);

std::string estimate_to_csv(const EstimateReport& report);

}  // namespace mfg
