#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mfg/error.hpp"
#include "mfg/field.hpp"
#include "mfg/oracle_lq.hpp"
#include "oracles.hpp"

using namespace mfg;

TEST_CASE("Riccati closed forms") {
  SUBCASE("zero data") {
    const auto p = riccati_solve({0, 0, 0, 0, 1.0}, 1e-2);
    for (std::size_t i = 0; i < p.t.size(); ++i) {
      CHECK(p.a[i] == 0.0);
      CHECK(p.b[i] == 0.0);
    }
  }
  SUBCASE("equilibrium a = 1") {
    const auto p = riccati_solve({1.0, 0.0, 1.0, 0.0, 2.0}, 1e-2);
    for (double v : p.a) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("tanh") {
    const auto p = riccati_solve({0.0, 0.0, 1.0, 0.0, 1.0}, 1e-4);
    CHECK(p.t.size() == 10001);
    double worst = 0.0;
    for (std::size_t i = 0; i < p.t.size(); ++i) worst = std::max(worst, std::fabs(p.a[i] - std::tanh(p.t[i])));
    CHECK(worst < 1e-8);
    for (double s : {0.123456, 0.5, 0.99999})
      CHECK(std::fabs(p.a_at(s) - std::tanh(s)) < 1e-8);
  }
  SUBCASE("mean slope for q = 0, p = 0, q_bar = 1") {
    // a = 0, b' = 1 - b^2 -> b = tanh t
    const auto p = riccati_solve({0.0, 0.0, 0.0, 1.0, 1.0}, 1e-4);
    CHECK(std::fabs(p.b.back() - std::tanh(1.0)) < 1e-8);
  }
  SUBCASE("final partial step lands on T") {
    const auto p = riccati_solve({1.0, 0.25, 1.0, 0.25, 1.0}, 0.3);
    CHECK(p.t.back() == 1.0);
    CHECK(p.t.size() == 5);
  }
}

TEST_CASE("Riccati blow-up is reported with its time") {
  // a' = -a^2, a(0) = -1 -> a = -1 / (1 - t)
  try {
    riccati_solve({-1.0, 0.0, 0.0, 0.0, 2.0}, 1e-3);
    FAIL("expected blow-up");
  } catch (const BlowUpError& e) {
    CHECK(std::fabs(e.time() - 1.0) < 0.05);
  }
  CHECK_THROWS_AS(riccati_solve({0, 0, 0, 0, 1.0}, 0.0), ValidationError);
}

TEST_CASE("shifted slope equals a + b") {
  const auto p = riccati_solve_shifted({1.0, 0.25, 1.0, 0.25, 1.0}, 1e-3);
  REQUIRE(p.c.size() == p.a.size());
  for (std::size_t i = 0; i < p.t.size(); ++i) CHECK(std::fabs(p.c[i] - (p.a[i] + p.b[i])) < 1e-12);
  CHECK(std::fabs(p.c_at(0.3337) - (p.a_at(0.3337) + p.b_at(0.3337))) < 1e-12);
}

TEST_CASE("oracle field satisfies the master equation") {
  for (const LQParams& prm : {LQParams{1.0, 0.25, 1.0, 0.25, 1.0}, LQParams{0.5, -0.3, 2.0, 0.7, 1.0},
                              LQParams{-1.0, 0.25, 1.0, 0.25, 0.5}}) {
    const auto W = oracle_field(prm, 1e-4);
    const std::vector<double> ts{0.1 * prm.T, 0.35 * prm.T, 0.6 * prm.T, 0.9 * prm.T}, xs{-1.5, -0.2, 0.4, 1.7}, ms{-0.8, 0.0, 0.5};
    CHECK(testing::master_equation_residual(*W, prm, 0.0, ts, xs, ms) <= 1e-6);
    CHECK(testing::master_equation_residual(*W, prm, 0.3, ts, xs, ms) <= 1e-6);
  }
}

TEST_CASE("wrong Riccati system leaves a visible residual") {
  // a' = q - a^2 replaced by a' = q - 2 a^2: the residual check must notice
  const LQParams prm{1.0, 0.25, 1.0, 0.25, 1.0};
  const auto good = riccati_solve(prm, 1e-4);
  const auto bad = make_field(1, [&](double t, std::span<const double> xs, const EmpiricalMeasure& mu,
                                      std::span<double> out) {
    // first-order perturbation of a in t
    for (std::size_t i = 0; i < xs.size(); ++i)
      out[i] = (good.a_at(t) + 0.05 * t) * xs[i] + good.b_at(t) * mu.mean()[0];
  });
  const std::vector<double> ts{0.5}, xs{1.0}, ms{0.0};
  CHECK(testing::master_equation_residual(*bad, prm, 0.0, ts, xs, ms) > 1e-3);
}

TEST_CASE("oracle field at t = 0 is W0 and stays monotone when the flag is set") {
  const LQParams prm{1.0, 0.25, 1.0, 0.25, 1.0};
  CHECK(prm.monotone());
  CHECK_FALSE((LQParams{-1.0, 0.25, 1.0, 0.25, 1.0}).monotone());
  const auto W = oracle_field(prm, 1e-3);
  const auto mu = EmpiricalMeasure::uniform(1, {0.0, 2.0});
  const double x = 0.7;
  CHECK(W->at(0.0, {&x, 1}, mu)[0] == 0.7 + 0.25);
  const auto path = riccati_solve(prm, 1e-3);
  SamplerSpec sp;
  for (double t : {0.0, 0.25, 0.5, 1.0}) {
    CHECK(path.a_at(t) >= 0.0);
    CHECK(path.a_at(t) + path.b_at(t) >= 0.0);
    CHECK(probe_l2_monotone(*time_slice(W, t), sp, 200, 3).passed);
  }
}

TEST_CASE("parameters are read from the lq family only") {
  const auto cs = make_coefficients("lq", 1, {{"q", 1.0}, {"p_bar", 0.5}});
  const auto p = lq_params_from(cs, 2.0);
  CHECK(p.q == 1.0);
  CHECK(p.p_bar == 0.5);
  CHECK(p.T == 2.0);
  CHECK_THROWS_AS(lq_params_from(make_coefficients("zero", 1, {}), 1.0), UnsupportedError);
  CHECK_THROWS_AS(lq_params_from(make_coefficients("lq", 2, {}), 1.0), UnsupportedError);
}

TEST_CASE("Riccati CSV") {
  const auto csv = riccati_to_csv(riccati_solve_shifted({1.0, 0.0, 0.0, 0.0, 1.0}, 0.5));
  CHECK(csv.rfind("t,a,b", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}
