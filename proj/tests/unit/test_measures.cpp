#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "mfg/error.hpp"
#include "mfg/io.hpp"
#include "mfg/measures.hpp"
#include "mfg/rng.hpp"
#include "oracles.hpp"

using namespace mfg;

namespace {

EmpiricalMeasure gaussian_cloud(std::size_t n, std::size_t d, double s, std::uint64_t seed, double mean = 0.0) {
  const CounterRng rng(seed, 0);
  std::vector<double> pts(n * d);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = mean + s * rng.normal(i);
  return EmpiricalMeasure::uniform(d, std::move(pts));
}

}  // namespace

TEST_CASE("measure construction validates its input") {
  CHECK_THROWS_AS(EmpiricalMeasure(1, {0.0, 1.0}, {0.5, 0.6}), ValidationError);
  CHECK_THROWS_AS(EmpiricalMeasure(2, {0.0, 1.0, 2.0}, {1.0}), DimensionError);
  CHECK_THROWS_AS(EmpiricalMeasure(1, {0.0}, {-1.0}), ValidationError);
  CHECK_THROWS_AS(EmpiricalMeasure::uniform(2, {1.0, 2.0, 3.0}), DimensionError);
}

TEST_CASE("moments, mean and spread") {
  const auto mu = EmpiricalMeasure(1, {-1.0, 1.0, 3.0}, {0.25, 0.5, 0.25});
  CHECK(mu.mean()[0] == doctest::Approx(1.0));
  CHECK(mu.second_moment() == doctest::Approx(0.25 + 0.5 + 2.25));
  CHECK(moment(mu, 0.0) == doctest::Approx(1.0));
  CHECK(moment(mu, 1.0) == doctest::Approx(0.25 + 0.5 + 0.75));
  CHECK(moment(mu, 2.0) == doctest::Approx(3.0));
  CHECK(mu.spread() == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(moment(mu, -1.0), ValidationError);
  const auto dirac = EmpiricalMeasure::dirac({2.0, -1.0});
  CHECK(dirac.size() == 1);
  CHECK(dirac.second_moment() == doctest::Approx(5.0));
  CHECK(dirac.spread() == 0.0);
}

TEST_CASE("shift pushforward and marginals") {
  const auto mu = gaussian_cloud(50, 2, 1.0, 3);
  const double th[2] = {0.5, -2.0};
  const auto nu = pushforward_shift(mu, th);
  CHECK(nu.mean()[0] == doctest::Approx(mu.mean()[0] + 0.5));
  CHECK(nu.mean()[1] == doctest::Approx(mu.mean()[1] - 2.0));
  CHECK(nu.spread() == doctest::Approx(mu.spread()));
  const auto first = marginal(mu, Marginal::First);
  CHECK(first.dim() == 1);
  CHECK(first.points()[3] == mu.point(3)[0]);
  CHECK_THROWS_AS(marginal(first, Marginal::First), DimensionError);
}

TEST_CASE("lifted norms") {
  const std::vector<double> a{1.0, 2.0, 3.0, 4.0}, w{0.5, 0.5};
  CHECK(lifted_norm_sq(a, w, 2) == doctest::Approx(0.5 * 5 + 0.5 * 25));
  CHECK(lifted_inner(a, a, w, 2) == doctest::Approx(lifted_norm_sq(a, w, 2)));
}

TEST_CASE("W2 closed forms") {
  SUBCASE("translation of a cloud") {
    const auto mu = gaussian_cloud(200, 1, 1.0, 5);
    const double th = 0.75;
    const auto nu = pushforward_shift(mu, {&th, 1});
    const auto r = wasserstein2(mu, nu);
    CHECK(r.method == "sorted");
    CHECK(r.value == doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("diracs") {
    const auto r = wasserstein2(EmpiricalMeasure::dirac({0.0, 0.0}), EmpiricalMeasure::dirac({3.0, 4.0}));
    CHECK(r.value == doctest::Approx(5.0));
  }
  SUBCASE("different sizes in one dimension use the quantile coupling") {
    const auto mu = EmpiricalMeasure::uniform(1, {0.0, 1.0});
    const auto nu = EmpiricalMeasure::uniform(1, {0.0, 0.5, 1.0, 1.5});
    const auto r = wasserstein2(mu, nu);
    CHECK(r.method == "quantile");
    CHECK(r.exact);
    // quantiles: [0,.25)->0 vs 0, [.25,.5)->0 vs .5, [.5,.75)->1 vs 1, [.75,1)->1 vs 1.5
    CHECK(r.value * r.value == doctest::Approx(0.25 * 0.25 + 0.25 * 0.25));
  }
  SUBCASE("large multi-dimensional clouds fall back to entropic transport") {
    const auto mu = gaussian_cloud(80, 2, 1.0, 6);
    const auto nu = gaussian_cloud(80, 2, 1.0, 7, 1.0);
    const auto r = wasserstein2(mu, nu);
    CHECK(r.method == "sinkhorn");
    CHECK_FALSE(r.exact);
  }
  SUBCASE("coupling marginals") {
    const auto mu = gaussian_cloud(10, 2, 1.0, 8);
    const auto nu = gaussian_cloud(10, 2, 1.0, 9);
    const auto c = optimal_coupling(mu, nu);
    for (std::size_t i = 0; i < 10; ++i) {
      double row = 0.0, col = 0.0;
      for (std::size_t j = 0; j < 10; ++j) {
        row += c.plan[i * 10 + j];
        col += c.plan[j * 10 + i];
      }
      CHECK(row == doctest::Approx(0.1));
      CHECK(col == doctest::Approx(0.1));
    }
  }
}

TEST_CASE("assignment matches permutation enumeration") {
  for (std::size_t d : {1u, 2u, 3u})
    for (std::size_t n = 1; n <= 7; ++n) {
      CAPTURE(d);
      CAPTURE(n);
      const auto mu = gaussian_cloud(n, d, 1.0, 100 + n * 7 + d);
      const auto nu = gaussian_cloud(n, d, 1.0, 200 + n * 7 + d, 0.3);
      const auto brute = testing::brute_force_matching(mu, nu);
      std::vector<double> cost(n * n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < d; ++c) s += std::pow(mu.point(i)[c] - nu.point(j)[c], 2);
          cost[i * n + j] = s;
        }
      const auto perm = solve_assignment(cost, n);
      CHECK(perm == brute.perm);
      CHECK(matching_cost(mu, nu, perm) == brute.cost);
      CHECK(wasserstein2(mu, nu).value == std::sqrt(brute.cost));
    }
}

TEST_CASE("KDE entropy and Fisher information on Gaussians") {
  const double s = 0.7;
  const auto mu = gaussian_cloud(4000, 1, s, 11);
  const double h = silverman_bandwidth(mu);
  const double exact_entropy = -0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * s * s);
  CHECK(std::fabs(entropy_kde(mu, h) - exact_entropy) < 0.1);
  CHECK(std::fabs(fisher_kde(mu, h) / (1.0 / (s * s)) - 1.0) < 0.2);
  CHECK(entropy_kde(mu, h) >= -std::numbers::pi * mu.second_moment());
  CHECK_THROWS_AS(entropy_kde(mu, 0.0), ValidationError);
  CHECK_THROWS_AS(silverman_bandwidth(EmpiricalMeasure::uniform(1, {1.0, 1.0})), ValidationError);
}

TEST_CASE("KDE functionals are exactly translation invariant on dyadic clouds") {
  // coordinates on a 2^-10 lattice, shifted by 2^-3: every pairwise difference is exact
  const CounterRng rng(12, 0);
  for (std::size_t d : {1u, 2u}) {
    std::vector<double> pts(300 * d);
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = std::round(rng.normal(i) * 1024.0) / 1024.0;
    const auto mu = EmpiricalMeasure::uniform(d, pts);
    const std::vector<double> th(d, 0.125);
    const auto nu = pushforward_shift(mu, th);
    CHECK(fisher_kde(mu, 0.25) == fisher_kde(nu, 0.25));
    CHECK(entropy_kde(mu, 0.25) == entropy_kde(nu, 0.25));
  }
}

TEST_CASE("measure CSV and JSON round trip") {
  const auto mu = EmpiricalMeasure(2, {0.1, -0.2, 1.0 / 3.0, 7.0}, {0.25, 0.75});
  const auto back = io::measure_from_csv(io::measure_to_csv(mu));
  CHECK(back.dim() == 2);
  for (std::size_t i = 0; i < 4; ++i) CHECK(back.points()[i] == mu.points()[i]);
  CHECK(back.weight(1) == 0.75);
  const auto j = io::measure_from_json(io::measure_to_json(mu));
  CHECK(j.points()[2] == mu.points()[2]);
}
