#include "mfg/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfg/error.hpp"
#include "mfg/simd/kernels.hpp"

namespace mfg {

EmpiricalMeasure::EmpiricalMeasure(std::size_t dim, std::vector<double> points, std::vector<double> weights)
    : dim_(dim), points_(std::move(points)), weights_(std::move(weights)) {
  if (dim_ == 0) throw ValidationError("measure dimension must be positive");
  if (weights_.empty()) throw ValidationError("measure needs at least one atom");
  if (points_.size() != weights_.size() * dim_)
    throw DimensionError("point array length " + std::to_string(points_.size()) + " does not match " +
                         std::to_string(weights_.size()) + " atoms of dimension " + std::to_string(dim_));
  long double total = 0.0L;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw ValidationError("measure weights must be nonnegative");
    total += w;
  }
  if (std::fabs(static_cast<double>(total - 1.0L)) > 1e-12)
    throw ValidationError("measure weights sum to " + std::to_string(static_cast<double>(total)));
  uniform_ = std::all_of(weights_.begin(), weights_.end(), [&](double w) { return w == weights_[0]; });
  refresh();
}

EmpiricalMeasure EmpiricalMeasure::uniform(std::size_t dim, std::vector<double> points) {
  if (dim == 0 || points.empty() || points.size() % dim != 0)
    throw DimensionError("uniform cloud needs a positive whole number of atoms");
  const std::size_t n = points.size() / dim;
  EmpiricalMeasure mu;
  mu.dim_ = dim;
  mu.points_ = std::move(points);
  mu.weights_.assign(n, 1.0 / static_cast<double>(n));
  mu.uniform_ = true;
  mu.refresh();
  return mu;
}

EmpiricalMeasure EmpiricalMeasure::dirac(std::vector<double> point) {
  const std::size_t d = point.size();
  return uniform(d, std::move(point));
}

void EmpiricalMeasure::refresh() {
  const std::size_t n = size();
  mean_.assign(dim_, 0.0);
  const auto& k = simd::active();
  if (dim_ == 1) {
    mean_[0] = uniform_ ? k.sum(points_.data(), n) / static_cast<double>(n) : k.dot(points_.data(), weights_.data(), n);
    second_moment_ = uniform_ ? k.sum_squares(points_.data(), n) / static_cast<double>(n) : 0.0;
    if (!uniform_)
      for (std::size_t i = 0; i < n; ++i) second_moment_ += weights_[i] * points_[i] * points_[i];
  } else {
    second_moment_ = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = weights_[i];
      const double* x = points_.data() + i * dim_;
      for (std::size_t c = 0; c < dim_; ++c) {
        mean_[c] += w * x[c];
        second_moment_ += w * x[c] * x[c];
      }
    }
  }
  double centered = second_moment_;
  for (double m : mean_) centered -= m * m;
  spread_ = std::sqrt(std::max(centered, 0.0) / static_cast<double>(dim_));
}

double moment(const EmpiricalMeasure& mu, double q) {
  if (!(q >= 0.0)) throw ValidationError("moment order must be nonnegative");
  if (q == 2.0) return mu.second_moment();
  const std::size_t d = mu.dim();
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    auto x = mu.point(i);
    double r2 = 0.0;
    for (std::size_t c = 0; c < d; ++c) r2 += x[c] * x[c];
    // 0^0 counts as 1 so that moment(mu, 0) is the total mass
    acc += mu.weight(i) * (q == 0.0 ? 1.0 : std::pow(std::sqrt(r2), q));
  }
  return acc;
}

std::vector<double> mean(const EmpiricalMeasure& mu) { return {mu.mean().begin(), mu.mean().end()}; }

EmpiricalMeasure pushforward_shift(const EmpiricalMeasure& mu, std::span<const double> theta) {
  const std::size_t d = mu.dim();
  if (theta.size() != d) throw DimensionError("shift length does not match measure dimension");
  std::vector<double> pts(mu.points().begin(), mu.points().end());
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t c = 0; c < d; ++c) pts[i * d + c] += theta[c];
  if (mu.is_uniform()) return EmpiricalMeasure::uniform(d, std::move(pts));
  return EmpiricalMeasure(d, std::move(pts), {mu.weights().begin(), mu.weights().end()});
}

EmpiricalMeasure marginal(const EmpiricalMeasure& m, Marginal which) {
  if (m.dim() % 2 != 0) throw DimensionError("marginal needs an even dimension");
  const std::size_t d = m.dim() / 2;
  const std::size_t off = which == Marginal::First ? 0 : d;
  std::vector<double> pts(m.size() * d);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t c = 0; c < d; ++c) pts[i * d + c] = m.point(i)[off + c];
  if (m.is_uniform()) return EmpiricalMeasure::uniform(d, std::move(pts));
  return EmpiricalMeasure(d, std::move(pts), {m.weights().begin(), m.weights().end()});
}

double lifted_norm_sq(std::span<const double> diff, std::span<const double> weights, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    double r2 = 0.0;
    for (std::size_t c = 0; c < dim; ++c) r2 += diff[i * dim + c] * diff[i * dim + c];
    acc += weights[i] * r2;
  }
  return acc;
}

double lifted_inner(std::span<const double> a, std::span<const double> b, std::span<const double> weights,
                    std::size_t dim) {
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < dim; ++c) s += a[i * dim + c] * b[i * dim + c];
    acc += weights[i] * s;
  }
  return acc;
}

}  // namespace mfg
