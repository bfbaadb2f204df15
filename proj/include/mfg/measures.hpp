#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mfg {

/// Weighted particle cloud on R^d. Points are stored row-major (atom i
/// occupies points()[i*dim .. i*dim+dim)).
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(std::size_t dim, std::vector<double> points, std::vector<double> weights);

  static EmpiricalMeasure uniform(std::size_t dim, std::vector<double> points);
  static EmpiricalMeasure dirac(std::vector<double> point);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return weights_.size(); }
  bool is_uniform() const { return uniform_; }

  std::span<const double> points() const { return points_; }
  std::span<const double> point(std::size_t i) const { return {points_.data() + i * dim_, dim_}; }
  std::span<const double> weights() const { return weights_; }
  double weight(std::size_t i) const { return weights_[i]; }

  /// Cached statistics, recomputed by refresh().
  std::span<const double> mean() const { return mean_; }
  double second_moment() const { return second_moment_; }
  /// Square root of the average per-coordinate variance.
  double spread() const { return spread_; }

  /// In-place update of atom positions; call refresh() afterwards.
  std::vector<double>& mutable_points() { return points_; }
  void refresh();

 private:
  EmpiricalMeasure() = default;

  std::size_t dim_ = 0;
  std::vector<double> points_;
  std::vector<double> weights_;
  std::vector<double> mean_;
  double second_moment_ = 0.0;
  double spread_ = 0.0;
  bool uniform_ = false;
};

double moment(const EmpiricalMeasure& mu, double q);
std::vector<double> mean(const EmpiricalMeasure& mu);

EmpiricalMeasure pushforward_shift(const EmpiricalMeasure& mu, std::span<const double> theta);

enum class Marginal { First, Second };
EmpiricalMeasure marginal(const EmpiricalMeasure& m, Marginal which);

/// Lifted L2 quantities for clouds that share weights atom by atom.
double lifted_norm_sq(std::span<const double> diff, std::span<const double> weights, std::size_t dim);
double lifted_inner(std::span<const double> a, std::span<const double> b, std::span<const double> weights,
                    std::size_t dim);

// ---- transport ---------------------------------------------------------------

struct W2Result {
  double value = 0.0;
  bool exact = true;
  std::string method;  // "sorted", "quantile", "assignment", "sinkhorn"
};

struct Coupling {
  EmpiricalMeasure left;
  EmpiricalMeasure right;
  std::vector<double> plan;  // left.size() x right.size(), row-major
};

W2Result wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);
Coupling optimal_coupling(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// Minimum-cost perfect matching on an n x n cost matrix (Hungarian method).
/// Returns perm with row i matched to column perm[i].
std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n);

/// Mean squared distance of a matching, summed over i in increasing order.
double matching_cost(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, std::span<const std::size_t> perm);

// ---- density functionals ------------------------------------------------------

double silverman_bandwidth(const EmpiricalMeasure& mu);

/// sum_i w_i log p(x_i), p the leave-one-out Gaussian kernel density.
/// With this sign N(0,1) gives about -1.4189.
double entropy_kde(const EmpiricalMeasure& mu, double bandwidth);

/// sum_i w_i |grad log p(x_i)|^2 with the same density.
double fisher_kde(const EmpiricalMeasure& mu, double bandwidth);

}  // namespace mfg
