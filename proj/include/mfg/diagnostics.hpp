#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mfg/coefficients.hpp"
#include "mfg/field.hpp"

namespace mfg {

/// sum_i w_i (W1(t, x_i, L(X)) - W2(t, y_i, L(Y))) . (x_i - y_i), atoms paired by index.
double z_functional(const Field& W1, const Field& W2, double t, const EmpiricalMeasure& X, const EmpiricalMeasure& Y);

struct ZValue {
  double value = 0.0;
  double stderr = 0.0;  // from the fields' Monte Carlo errors
};
ZValue z_functional_with_error(const Field& W1, const Field& W2, double t, const EmpiricalMeasure& X,
                               const EmpiricalMeasure& Y);

struct ZReport {
  double min_value = 0.0;
  double argmin_time = 0.0;
  std::size_t argmin_pair_index = 0;
  std::uint64_t argmin_pair_seed = 0;
  std::size_t n_samples = 0;
  double tolerance_used = 0.0;  // 3 x largest pair standard error + 1e-10
  bool passed = false;
  std::vector<double> times;
  std::vector<double> min_by_time;
};

ZReport propagation_check(const Field& W1, const Field& W2, const std::vector<double>& times,
                          const SamplerSpec& sampler, std::size_t n_pairs, std::uint64_t seed);
ZReport propagation_check(const Field& field, const std::vector<double>& times, const SamplerSpec& sampler,
                          std::size_t n_pairs, std::uint64_t seed);

std::string z_report_to_json(const ZReport& report);

struct PhiParams {
  double alpha = 0.0;
  double lambda = 0.0;
  double psi_value = 0.0;
  std::function<double(std::span<const double> x, std::span<const double> y)> f;  // empty means 0
};

/// Z(t, m) - phi(t, m) + kappa * entropy(m) for m on R^{2d}; bandwidth <= 0 selects Silverman's rule.
double entropy_penalized_value(const Field& W, const MeasureMap& V, double t, const EmpiricalMeasure& m,
                               const PhiParams& phi, double kappa, double bandwidth);

/// phi(t, m) alone.
double phi_value(const PhiParams& phi, double t, const EmpiricalMeasure& m);

}  // namespace mfg
