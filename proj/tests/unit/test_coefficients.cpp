#include <cmath>
#include <vector>

#include "doctest.h"
#include "mfg/coefficients.hpp"
#include "mfg/error.hpp"

using namespace mfg;

namespace {

SamplerSpec gaussian_sampler(std::size_t atoms = 16) {
  SamplerSpec s;
  s.atoms = atoms;
  return s;
}

}  // namespace

TEST_CASE("affine maps evaluate componentwise") {
  const auto mu = EmpiricalMeasure::uniform(1, {1.0, 3.0});
  const auto f = affine_measure_map({2.0, -1.0, 0.0, 0.5});
  const double x = 4.0;
  CHECK((*f)({&x, 1}, mu)[0] == doctest::Approx(2.0 * 4.0 - 2.0 + 0.5));
  const auto g = affine_control_map({1.0, 1.0, 3.0, 0.0});
  const double u = -1.0;
  CHECK((*g)({&x, 1}, mu, {&u, 1})[0] == doctest::Approx(4.0 + 2.0 - 3.0));
  REQUIRE(as_affine(*f).has_value());
  CHECK(as_affine(*f)->cx == 2.0);
  const auto lifted = f->lifted(mu);
  CHECK(lifted[1] == doctest::Approx(2.0 * 3.0 - 2.0 + 0.5));
}

TEST_CASE("family registry") {
  const auto names = family_names();
  for (const char* n : {"lq", "affine", "holder", "zero"}) CHECK(has_family(n));
  CHECK_FALSE(has_family("nope"));
  CHECK_THROWS(make_coefficients("nope", 1, {}));
  CHECK_THROWS_AS(make_coefficients("lq", 1, {{"bogus", 1.0}}), ValidationError);
  const auto cs = make_coefficients("lq", 1, {{"q", 1.0}, {"q_bar", 0.25}, {"p", 1.0}, {"p_bar", 0.25}});
  CHECK(cs.family == "lq");
  CHECK(cs.regime.kind == RegimeKind::WeakStrongInX);
  REQUIRE(cs.regime.a0.has_value());
  CHECK(*cs.regime.a0 == doctest::Approx(0.8));
  CHECK(make_coefficients("zero", 2, {}).regime.kind == RegimeKind::JointMonotone);
  CHECK_THROWS_AS(make_coefficients("holder", 1, {{"gamma", 1.5}}), ValidationError);
  for (auto k : {RegimeKind::None, RegimeKind::JointMonotone, RegimeKind::WeakStrongInX, RegimeKind::StrongInX,
                 RegimeKind::WeakStrongInW, RegimeKind::StrongInW})
    CHECK(regime_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(regime_from_string("sideways"), ValidationError);

  register_family("test_custom", [](std::size_t d, const Params& p) {
    auto cs = make_coefficients("zero", d, {});
    cs.family = "test_custom";
    cs.params = p;
    return cs;
  });
  CHECK(make_coefficients("test_custom", 1, {}).family == "test_custom");
}

TEST_CASE("clipped cubic is C1 with linear growth outside the radius") {
  CHECK(clipped_cubic(2.0, 10.0) == 8.0);
  CHECK(clipped_cubic(10.0, 10.0) == doctest::Approx(1000.0));
  const double h = 1e-6;
  CHECK((clipped_cubic(10.0 + h, 10.0) - clipped_cubic(10.0 - h, 10.0)) / (2 * h) == doctest::Approx(300.0).epsilon(1e-6));
  CHECK(clipped_cubic(-20.0, 10.0) == doctest::Approx(-(3.0 * 100 * 20 - 2000)));
  CHECK(make_base_map("cubic_clipped", 1, {}).growth_constant.value() == doctest::Approx(300.0));
}

TEST_CASE("samplers are deterministic per seed and index") {
  auto sp = gaussian_sampler();
  auto [a, b] = sample_cloud_pair(sp, 5, 3);
  auto [c, d] = sample_cloud_pair(sp, 5, 3);
  CHECK(std::vector<double>(a.points().begin(), a.points().end()) ==
        std::vector<double>(c.points().begin(), c.points().end()));
  CHECK(std::vector<double>(b.points().begin(), b.points().end()) ==
        std::vector<double>(d.points().begin(), d.points().end()));
  auto [e, f] = sample_cloud_pair(sp, 5, 4);
  CHECK(e.points()[0] != a.points()[0]);
  CHECK(pair_seed(5, 3) != pair_seed(5, 4));

  SamplerSpec box;
  box.kind = SamplerSpec::Kind::UniformBox;
  box.lo = -2.0;
  box.hi = 2.0;
  box.atoms = 64;
  RngStream rng(CounterRng(1, 2));
  const auto cloud = sample_cloud(box, rng);
  for (double x : cloud.points()) CHECK((x >= -2.0 && x <= 2.0));
}

TEST_CASE("monotonicity probes") {
  const auto sp = gaussian_sampler();
  SUBCASE("monotone linear terminal map") {
    const auto r = probe_l2_monotone(*affine_measure_map({1.0, 0.25, 0.0, 0.0}), sp, 200, 3);
    CHECK(r.passed);
    CHECK(r.n_pairs == 200);
    CHECK(r.min_quotient >= 1.0 - 1e-9);
  }
  SUBCASE("anti-monotone map fails with a reproducible witness") {
    const auto w0 = affine_measure_map({-1.0, 0.25, 0.0, 0.0});
    const auto r = probe_l2_monotone(*w0, sp, 200, 3);
    CHECK_FALSE(r.passed);
    CHECK(r.worst_pair_seed == pair_seed(3, r.worst_pair_index));
    auto [x, y] = sample_cloud_pair(sp, 3, r.worst_pair_index);
    const auto dw0 = w0->lifted(x), dw1 = w0->lifted(y);
    std::vector<double> dw(x.size()), dx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      dw[i] = dw0[i] - dw1[i];
      dx[i] = x.points()[i] - y.points()[i];
    }
    CHECK(lifted_inner(dw, dx, x.weights(), 1) / lifted_norm_sq(dx, x.weights(), 1) ==
          doctest::Approx(r.min_quotient));
  }
  SUBCASE("mean-field monotone but not pointwise") {
    // W0 = x - 2 mean: <dW, dX> = |dX|^2 - 2 |d mean|^2 can be negative
    const auto r = probe_l2_monotone(*affine_measure_map({1.0, -2.0, 0.0, 0.0}), sp, 500, 4);
    CHECK_FALSE(r.passed);
  }
  SUBCASE("joint monotonicity of LQ controls") {
    const auto cs = make_coefficients("lq", 1, {{"q", 1.0}, {"q_bar", 0.25}});
    CHECK(probe_joint_monotone(*cs.F, *cs.G, sp, 200, 5).passed);
    const auto bad = make_coefficients("lq", 1, {{"q", -1.0}});
    CHECK_FALSE(probe_joint_monotone(*bad.F, *bad.G, sp, 200, 5).passed);
  }
  SUBCASE("terminal coercivity of p x") {
    const auto r = probe_terminal_coercivity(*affine_measure_map({2.0, 0.0, 0.0, 0.0}), sp, 100, 6);
    CHECK(r.passed);
    CHECK(r.min_quotient == doctest::Approx(0.5));
  }
  CHECK_THROWS_AS(probe_l2_monotone(*affine_measure_map({}), sp, 0, 1), ValidationError);
}

TEST_CASE("weak-strong fit recovers the monotonicity constant of G = q x") {
  const auto cs = make_coefficients("lq", 1, {{"q", 0.5}});
  const auto fit = fit_weak_strong(*cs.F, *cs.G, gaussian_sampler(), 400, 9, Direction::InX);
  // <dG, dX> + <dF, dU> = q |dX|^2 + |dU|^2, so alpha = q with L = 0 is feasible and optimal
  CHECK(fit.alpha == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(fit.L == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("holder norm and growth certification") {
  CHECK(holder_norm_gamma(0.25, 0.5) == doctest::Approx(0.5));
  CHECK(holder_norm_gamma(4.0, 0.5) == doctest::Approx(4.0));
  CHECK_THROWS_AS(holder_norm_gamma(-1.0, 0.5), ValidationError);
  const auto cs = make_coefficients("lq", 1, {{"q", 1.0}, {"q_bar", 0.25}, {"p", 1.0}, {"p_bar", 0.25}});
  CHECK(certify_growth(cs, gaussian_sampler(), 2000, 1));
  auto lying = cs;
  lying.growth_constant = 0.1;
  CHECK_FALSE(certify_growth(lying, gaussian_sampler(), 2000, 1));
}

TEST_CASE("lifted Lipschitz quotient of a linear map") {
  const auto f = affine_measure_map({2.0, 0.0, 0.0, 0.0});
  CHECK(lifted_lipschitz_quotient(*f, gaussian_sampler(), 50, 2) == doctest::Approx(2.0));
}
