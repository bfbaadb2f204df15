#include <cmath>
#include <vector>

#include "doctest.h"
#include "mfg/error.hpp"
#include "mfg/harness.hpp"
#include "mfg/oracle_lq.hpp"

using namespace mfg;

namespace {

CoefficientSet lq() { return make_coefficients("lq", 1, {{"q", 1.0}, {"q_bar", 0.25}, {"p", 1.0}, {"p_bar", 0.25}}); }

SolverScenario scenario() {
  SolverScenario sc;
  sc.T = 0.5;
  sc.dt = 0.05;
  sc.N = 400;
  sc.M = 8;
  sc.sigma_x = 0.1;
  const CounterRng rng(3, 0);
  std::vector<double> p(400);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = 0.5 + 0.5 * rng.normal(i);
  sc.references = {EmpiricalMeasure::uniform(1, std::move(p))};
  sc.grid = {-2.0, 2.0, 9, {-0.5, 0.0, 0.5}};
  sc.seed = 5;
  return sc;
}

}  // namespace

TEST_CASE("exponent table") {
  for (double g : {0.1, 0.25, 0.5, 0.75, 0.9, 1.0}) {
    CAPTURE(g);
    CHECK(predicted_w_exponent(RegimeKind::WeakStrongInX, g) == 1.0);
    CHECK(predicted_x_exponent(RegimeKind::WeakStrongInX, g) == g);
    CHECK(predicted_w_exponent(RegimeKind::StrongInX, g) == g / (2.0 - g));
    CHECK(predicted_x_exponent(RegimeKind::StrongInX, g) == g * g / (2.0 - g));
    CHECK(predicted_w_exponent(RegimeKind::WeakStrongInW, g) == g / (2.0 - g));
    CHECK(predicted_x_exponent(RegimeKind::WeakStrongInW, g) == 1.0 / (2.0 - g));
    CHECK(predicted_w_exponent(RegimeKind::StrongInW, g) == g * g / (2.0 - g * g));
    CHECK(predicted_x_exponent(RegimeKind::StrongInW, g) == g / (2.0 - g * g));
  }
  CHECK(predicted_w_exponent(RegimeKind::StrongInX, 0.5) == doctest::Approx(1.0 / 3.0));
  CHECK(predicted_w_exponent(RegimeKind::StrongInW, 0.5) == doctest::Approx(1.0 / 7.0));
  CHECK_THROWS_AS(predicted_w_exponent(RegimeKind::None, 1.0), ValidationError);
  CHECK_THROWS_AS(predicted_x_exponent(RegimeKind::JointMonotone, 1.0), ValidationError);
}

TEST_CASE("log-log slope") {
  const std::vector<double> x{1e-1, 1e-2, 1e-3};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 0.6));
  CHECK(fit_loglog_slope(x, y) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(std::isnan(fit_loglog_slope({1.0}, {1.0})));
  CHECK(std::isnan(fit_loglog_slope({1.0, 1.0}, {1.0, 2.0})));
  CHECK(gamma_norm(0.01, 0.5) == doctest::Approx(0.1));
}

TEST_CASE("stability of the exact LQ field is Lipschitz") {
  const auto cs = lq();
  const auto sc = scenario();
  const auto W = oracle_field(LQParams{1.0, 0.25, 1.0, 0.25, sc.T}, 1e-3);
  const auto& x0 = sc.references[0].points();
  std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
  for (double d : {1e-1, 1e-2, 1e-3}) {
    std::vector<double> a(x0.begin(), x0.end()), b = a;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += d * (i % 2 ? 1.0 : -0.5);
    pairs.emplace_back(std::move(a), std::move(b));
  }
  const auto rep = stability_harness(*W, cs, sc, pairs, 0.2);
  CHECK(rep.kind == "state");
  CHECK(rep.predicted_exponent == 1.0);
  CHECK(rep.fitted_exponent == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rep.ratio_spread == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rep.passed);
  CHECK(estimate_to_csv(rep).rfind("perturbation_size,ratio_W,ratio_X,fitted_exponent\n", 0) == 0);
}

TEST_CASE("stability harness on a solved field") {
  const auto cs = lq();
  const auto sc = scenario();
  const auto W = picard_solve(cs, sc, {1e-8, 50});
  REQUIRE(W.converged);
  const auto rep = stability_harness(W, cs, sc, StabilityOptions{});
  CHECK(rep.rows.size() == 3);
  CHECK(rep.rows[1].perturbation_size == 1e-2);
  CHECK(rep.passed);
  const auto mrep = measure_stability_harness(W, cs, sc, {1e-1, 5e-2, 2.5e-2}, 0.2);
  CHECK(mrep.kind == "measure");
  CHECK(mrep.fitted_exponent >= mrep.predicted_exponent - 0.2);

  auto bad = W;
  bad.converged = false;
  CHECK_THROWS_AS(stability_harness(bad, cs, sc, StabilityOptions{}), ConvergenceError);
  CHECK_THROWS_AS(stability_harness(W, make_coefficients("zero", 1, {}), sc, StabilityOptions{}), ValidationError);
}

TEST_CASE("measure gap of the exact LQ field is linear in the shift") {
  const auto cs = lq();
  const auto sc = scenario();
  const auto W = oracle_field(LQParams{1.0, 0.25, 1.0, 0.25, sc.T}, 1e-3);
  const auto g1 = measure_perturbation_gap(*W, cs, sc, 0.1);
  const auto g2 = measure_perturbation_gap(*W, cs, sc, 0.05);
  CHECK(g1.sup_w == doctest::Approx(2.0 * g2.sup_w).epsilon(1e-8));
  CHECK(measure_perturbation_gap(*W, cs, sc, 0.0).sup_w == 0.0);
}

TEST_CASE("spatial Lipschitz constant of a linear field") {
  const auto W = oracle_field(LQParams{1.0, 0.25, 1.0, 0.25, 1.0}, 1e-3);
  const auto mu = EmpiricalMeasure::uniform(1, {0.0, 1.0});
  CHECK(field_spatial_lipschitz(*W, 0.0, mu, -2.0, 2.0, 9) == doctest::Approx(1.0));
  CHECK_THROWS_AS(field_spatial_lipschitz(*W, 0.0, mu, 2.0, -2.0, 9), ValidationError);
}
