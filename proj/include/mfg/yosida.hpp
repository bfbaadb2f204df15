#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfg/coefficients.hpp"

namespace mfg {

struct ResolventOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  /// Lipschitz bound of the base map; enables plain fixed-point sweeps when eps*C < 1.
  std::optional<double> lipschitz_constant;
};

struct ResolventResult {
  EmpiricalMeasure cloud;
  int law_iterations = 0;
  double residual = 0.0;  // max atom |y + eps F(y, L(Y)) - x|
};

/// Y with Y + eps F(Y, L(Y)) = X atom by atom. Throws ConvergenceError.
ResolventResult resolvent(const MeasureMap& base, double eps, const EmpiricalMeasure& x,
                          const ResolventOptions& opts = {});

/// Solves y + eps F(y, law) = x for every point of xs with the law held fixed.
std::vector<double> invert_frozen(const MeasureMap& base, double eps, std::span<const double> xs,
                                  const EmpiricalMeasure& law, const ResolventOptions& opts = {});

/// F_eps(x, mu) = F(g_eps(x, mu), h_eps(mu)).
class RegularizedCoefficient final : public MeasureMap {
 public:
  /// shift_constant C regularizes F + C x and subtracts C x afterwards.
  RegularizedCoefficient(MeasureMapPtr base, double epsilon, ResolventOptions opts = {},
                         double shift_constant = 0.0, std::optional<double> declared_growth = std::nullopt);

  void apply(std::span<const double> xs, const EmpiricalMeasure& mu, std::span<double> out) const override;

  /// h_eps: law of the resolvent output.
  EmpiricalMeasure law_map(const EmpiricalMeasure& mu) const;
  /// g_eps(x, mu).
  std::vector<double> point_map(std::span<const double> xs, const EmpiricalMeasure& mu) const;

  double epsilon() const { return eps_; }
  double shift_constant() const { return shift_; }
  const ResolventOptions& options() const { return opts_; }

 private:
  MeasureMapPtr base_;      // shifted when shift_ != 0
  MeasureMapPtr original_;
  double eps_;
  ResolventOptions opts_;
  double shift_;
};

RegularizedCoefficient regularize(MeasureMapPtr base, double epsilon, ResolventOptions opts = {},
                                  double shift_constant = 0.0, std::optional<double> declared_growth = std::nullopt);

/// (1 + C) / (1 - C eps), infinite when C eps >= 1.
double regularized_growth_bound(double growth_constant, double epsilon);

struct SweepRow {
  double epsilon = 0.0;
  double sup_error = 0.0;
  double lipschitz_quotient = 0.0;
  double growth_ratio = 0.0;
};

struct SweepOptions {
  SamplerSpec compact;  // clouds on which sup |F_eps - F| and the growth ratio are measured
  std::size_t n_clouds = 16;
  SamplerSpec pairs;    // cloud pairs for the lifted Lipschitz quotient
  std::size_t n_pairs = 200;
  std::uint64_t seed = 1;
  ResolventOptions resolvent;
  double shift_constant = 0.0;
};

std::vector<SweepRow> convergence_sweep(MeasureMapPtr base, std::span<const double> epsilons,
                                        const SweepOptions& opts);

/// Largest |F(x, mu)| / (1 + |x| + sqrt(E2(mu))) over atoms of sampled clouds.
double growth_ratio(const MeasureMap& f, const SamplerSpec& sampler, std::size_t n_clouds, std::uint64_t seed);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace mfg
