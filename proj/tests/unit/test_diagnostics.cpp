#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "mfg/diagnostics.hpp"
#include "mfg/error.hpp"
#include "mfg/oracle_lq.hpp"

using namespace mfg;

TEST_CASE("Z functional of a linear field") {
  const auto W = oracle_field(LQParams{1.0, 0.25, 1.0, 0.25, 1.0}, 1e-3);
  const auto X = EmpiricalMeasure::uniform(1, {0.0, 2.0});
  const auto Y = EmpiricalMeasure::uniform(1, {1.0, 1.0});
  // dX = (-1, 1), d mean = 0: Z = a |dX|^2 = 1 at t = 0
  CHECK(z_functional(*W, *W, 0.0, X, Y) == doctest::Approx(1.0));
  const auto Z = z_functional_with_error(*W, *W, 0.0, X, Y);
  CHECK(Z.value == doctest::Approx(1.0));
  CHECK(Z.stderr == 0.0);
  const auto Y2 = EmpiricalMeasure::uniform(1, {1.0, 3.0});
  // dX = (-1, -1), d mean = -1: Z = a + b
  CHECK(z_functional(*W, *W, 0.0, X, Y2) == doctest::Approx(1.25));
  CHECK_THROWS_AS(z_functional(*W, *W, 0.0, X, EmpiricalMeasure::uniform(1, {1.0})), DimensionError);
}

TEST_CASE("propagation check separates monotone and non-monotone data") {
  SamplerSpec sp;
  const std::vector<double> times{0.0, 0.5, 1.0};
  const auto good = oracle_field(LQParams{1.0, 0.25, 1.0, 0.25, 1.0}, 1e-3);
  const auto r = propagation_check(*good, times, sp, 100, 3);
  CHECK(r.passed);
  CHECK(r.n_samples == 300);
  CHECK(r.min_by_time.size() == 3);
  const auto bad = oracle_field(LQParams{-1.0, 0.25, 1.0, 0.25, 1.0}, 1e-3);
  const auto rb = propagation_check(*bad, times, sp, 100, 3);
  CHECK_FALSE(rb.passed);
  CHECK(rb.min_by_time[0] < 0.0);
  CHECK(rb.argmin_pair_seed == pair_seed(3, rb.argmin_pair_index));
  auto [x, y] = sample_cloud_pair(sp, 3, rb.argmin_pair_index);
  CHECK(z_functional(*bad, *bad, rb.argmin_time, x, y) == doctest::Approx(rb.min_value));
  const auto j = nlohmann::json::parse(z_report_to_json(rb));
  CHECK(j["passed"] == false);
  CHECK(j["argmin"]["pair_seed"].get<std::uint64_t>() == rb.argmin_pair_seed);
}

TEST_CASE("phi and the entropy-penalized value") {
  const auto m = EmpiricalMeasure::uniform(2, {1.0, 0.0, -1.0, 2.0});
  PhiParams phi;
  phi.alpha = 0.5;
  phi.lambda = 1.0;
  phi.psi_value = 2.0;
  phi.f = [](std::span<const double> x, std::span<const double> y) { return x[0] * y[0]; };
  // E3 of marginals: 1 and (0 + 8) / 2 = 4
  const double expect = 2.0 + (-1.0) - 0.5 * std::exp(0.3) * 5.0;
  CHECK(phi_value(phi, 0.3, m) == doctest::Approx(expect));
  const auto W = oracle_field(LQParams{1.0, 0.0, 1.0, 0.0, 1.0}, 1e-3);
  const auto V = affine_measure_map({0.0, 0.0, 0.0, 0.0});
  // Z = (x - 0) (x - y) averaged: (1*1 + (-1)(-3)) / 2 = 2
  CHECK(entropy_penalized_value(*W, *V, 0.3, m, phi, 0.0, 0.0) == doctest::Approx(2.0 - expect));
  const auto mm = [] {
    const CounterRng rng(1, 0);
    std::vector<double> p(400);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = rng.normal(i);
    return EmpiricalMeasure::uniform(2, std::move(p));
  }();
  const double a = entropy_penalized_value(*W, *V, 0.3, mm, phi, 0.0, 0.0);
  const double b = entropy_penalized_value(*W, *V, 0.3, mm, phi, 0.5, 0.0);
  CHECK(b - a == doctest::Approx(0.5 * entropy_kde(mm, silverman_bandwidth(mm))));
  CHECK_THROWS_AS(phi_value(phi, 0.0, EmpiricalMeasure::uniform(1, {1.0})), DimensionError);
  CHECK_THROWS_AS(entropy_penalized_value(*W, *V, 0.3, m, phi, -1.0, 0.0), ValidationError);
}
