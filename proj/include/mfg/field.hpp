#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "mfg/coefficients.hpp"
#include "mfg/measures.hpp"

namespace mfg {

/// W(t, x, mu) with t in the initial-data convention (W(0) = W0).
class Field {
 public:
  virtual ~Field() = default;
  virtual std::size_t dim() const = 0;
  virtual void evaluate(double t, std::span<const double> xs, const EmpiricalMeasure& mu,
                        std::span<double> out) const = 0;
  /// Monte Carlo standard error of evaluate(); zero for exact fields.
  virtual void evaluate_stderr(double t, std::span<const double> xs, const EmpiricalMeasure& mu,
                               std::span<double> out) const;

  std::vector<double> at(double t, std::span<const double> x, const EmpiricalMeasure& mu) const;
  std::vector<double> lifted(double t, const EmpiricalMeasure& mu) const;
};

using FieldPtr = std::shared_ptr<const Field>;
using FieldFn = std::function<void(double t, std::span<const double> xs, const EmpiricalMeasure& mu,
                                   std::span<double> out)>;

FieldPtr make_field(std::size_t dim, FieldFn fn);
/// W(t, x, mu) = W0(x, mu) for every t.
FieldPtr constant_in_time(std::size_t dim, MeasureMapPtr w0);
/// (x, mu) -> W(t, x, mu) at a fixed time.
MeasureMapPtr time_slice(FieldPtr field, double t);
/// c * W.
FieldPtr scaled(FieldPtr field, double c);

}  // namespace mfg
