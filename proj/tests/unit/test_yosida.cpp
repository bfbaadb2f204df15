#include <cmath>
#include <vector>

#include "doctest.h"
#include "mfg/coefficients.hpp"
#include "mfg/error.hpp"
#include "mfg/yosida.hpp"
#include "oracles.hpp"

using namespace mfg;

namespace {

EmpiricalMeasure cloud(std::size_t n, double scale, std::uint64_t seed) {
  const CounterRng rng(seed, 0);
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = scale * rng.normal(i);
  return EmpiricalMeasure::uniform(1, std::move(p));
}

}  // namespace

TEST_CASE("resolvent of a pointwise cubic matches bisection") {
  const auto base = make_base_map("cubic", 1, {}).map;
  const auto x = cloud(40, 2.0, 1);
  for (double eps : {1.0, 0.1, 0.01}) {
    const auto r = resolvent(*base, eps, x);
    CHECK(r.residual <= 1e-10);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double y = testing::bisection_resolvent([](double v) { return v * v * v; }, eps, x.points()[i]);
      CHECK(std::fabs(r.cloud.points()[i] - y) < 1e-9);
    }
  }
}

TEST_CASE("resolvent with a law-dependent map solves the fixed point") {
  // F(y, law) = y + mean(law): Y + eps (Y + mean Y) = X
  const auto base = affine_measure_map({1.0, 1.0, 0.0, 0.0});
  const auto x = cloud(30, 1.0, 2);
  const double eps = 0.5;
  ResolventOptions opts;
  opts.lipschitz_constant = 2.0;
  const auto r = resolvent(*base, eps, x, opts);
  // mean: (1 + 2 eps) mY = mX ; atoms: (1 + eps) y = x - eps mY
  const double my = x.mean()[0] / (1.0 + 2.0 * eps);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(r.cloud.points()[i] == doctest::Approx((x.points()[i] - eps * my) / (1.0 + eps)).epsilon(1e-9));
  const auto r2 = resolvent(*base, eps, x);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::fabs(r2.cloud.points()[i] - r.cloud.points()[i]) < 1e-9);
  CHECK_THROWS_AS(resolvent(*base, 0.0, x), ValidationError);
}

TEST_CASE("frozen inversion in two dimensions") {
  const auto base = make_measure_map(2, [](std::span<const double> x, const EmpiricalMeasure&, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); i += 2) {
      out[i] = x[i] * x[i] * x[i] + x[i + 1];
      out[i + 1] = x[i + 1] - x[i];
    }
  });
  const auto law = EmpiricalMeasure::uniform(2, {0.0, 0.0});
  const std::vector<double> xs{1.0, 2.0, -3.0, 0.5};
  const auto y = invert_frozen(*base, 0.3, xs, law);
  for (std::size_t i = 0; i < xs.size(); i += 2) {
    const double r0 = y[i] + 0.3 * (std::pow(y[i], 3) + y[i + 1]) - xs[i];
    const double r1 = y[i + 1] + 0.3 * (y[i + 1] - y[i]) - xs[i + 1];
    CHECK(std::fabs(r0) < 1e-9);
    CHECK(std::fabs(r1) < 1e-9);
  }
}

TEST_CASE("regularized linear map has the closed form k/(1 + eps k)") {
  const auto base = make_base_map("linear", 1, {{"k", 4.0}}).map;
  const auto fe = regularize(base, 0.25);
  const auto mu = cloud(20, 1.0, 3);
  const auto v = fe.lifted(mu);
  for (std::size_t i = 0; i < mu.size(); ++i) CHECK(v[i] == doctest::Approx(4.0 / 2.0 * mu.points()[i]).epsilon(1e-9));
  SamplerSpec sp;
  CHECK(lifted_lipschitz_quotient(fe, sp, 50, 4) <= 1.0 / 0.25 + 1e-6);
}

TEST_CASE("shift constant regularizes F + C x and subtracts C x") {
  // F = -x is not monotone; F + 2x = x is, with resolvent y = x / (1 + eps)
  const auto base = make_base_map("linear", 1, {{"k", -1.0}}).map;
  const auto fe = regularize(base, 0.5, {}, 2.0);
  const double x = 3.0;
  const auto mu = EmpiricalMeasure::uniform(1, {x});
  CHECK(fe({&x, 1}, mu)[0] == doctest::Approx(x / 1.5 - 2.0 * x).epsilon(1e-9));
}

TEST_CASE("growth bound and validation of the declared constant") {
  CHECK(regularized_growth_bound(2.0, 0.25) == doctest::Approx(6.0));
  CHECK(std::isinf(regularized_growth_bound(2.0, 0.5)));
  const auto base = make_base_map("cubic_clipped", 1, {});
  CHECK_THROWS_AS(regularize(base.map, 1.0, {}, 0.0, base.growth_constant), ValidationError);
  CHECK_NOTHROW(regularize(base.map, 1.0 / 600.0, {}, 0.0, base.growth_constant));
}

TEST_CASE("convergence sweep on the clipped cubic") {
  const auto base = make_base_map("cubic_clipped", 1, {}).map;
  SweepOptions opts;
  opts.compact.kind = SamplerSpec::Kind::UniformBox;
  opts.compact.lo = -2.0;
  opts.compact.hi = 2.0;
  opts.n_clouds = 8;
  opts.n_pairs = 100;
  const std::vector<double> eps{1.0, 0.5, 0.25, 0.125};
  const auto rows = convergence_sweep(base, eps, opts);
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].epsilon == eps[i]);
    CHECK(rows[i].lipschitz_quotient <= 1.0 / eps[i] + 1e-6);
    if (i > 0) CHECK(rows[i].sup_error < rows[i - 1].sup_error);
  }
  const auto csv = sweep_to_csv(rows);
  CHECK(csv.rfind("epsilon,sup_error,lipschitz_quotient,growth_ratio\n", 0) == 0);
}
