#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "mfg/error.hpp"
#include "mfg/oracle_lq.hpp"
#include "mfg/parallel.hpp"
#include "mfg/solver.hpp"
#include "oracles.hpp"

using namespace mfg;

namespace {

const LQParams kLQ{1.0, 0.25, 1.0, 0.25, 1.0};

CoefficientSet lq() { return make_coefficients("lq", 1, {{"q", 1.0}, {"q_bar", 0.25}, {"p", 1.0}, {"p_bar", 0.25}}); }

EmpiricalMeasure gaussian(std::size_t n, double mean, double s, std::uint64_t seed) {
  const CounterRng rng(seed, 0);
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = mean + s * rng.normal(i);
  return EmpiricalMeasure::uniform(1, std::move(p));
}

SolverScenario small_scenario(double sigma, std::size_t M = 8) {
  SolverScenario sc;
  sc.T = 0.5;
  sc.dt = 0.05;
  sc.N = 200;
  sc.M = M;
  sc.sigma_x = sigma;
  sc.references = {gaussian(200, 0.5, 0.5, 1)};
  sc.grid = {-2.0, 2.0, 9, {-0.5, 0.0, 0.5}};
  sc.seed = 17;
  return sc;
}

}  // namespace

TEST_CASE("initial field stores W0 at every time and interpolates linear data exactly") {
  const auto cs = lq();
  const auto sc = small_scenario(0.0);
  const auto f = initial_field(cs, sc);
  CHECK(f.steps() == 10);
  CHECK(f.n_nodes() == 9);
  CHECK(f.n_shift_nodes() == 3);
  CHECK(f.table_size() == 1 * 11 * 3 * 9);
  const auto mu = gaussian(50, 0.3, 0.4, 2);
  for (double t : {0.0, 0.123, 0.5, 0.7})
    for (double x : {-3.0, -0.37, 1.9, 2.5}) {
      CAPTURE(t);
      CAPTURE(x);
      CHECK(f.at(t, {&x, 1}, mu)[0] == doctest::Approx(x + 0.25 * mu.mean()[0]).epsilon(1e-12));
    }
  CHECK(f.node_point(4)[0] == doctest::Approx(0.0));
  CHECK(f.shift_offset(2)[0] == 0.5);
}

TEST_CASE("decoupling field validation and persistence") {
  const auto cs = lq();
  auto sc = small_scenario(0.0);
  sc.grid.shifts = {0.5, 0.0};
  CHECK_THROWS_AS(initial_field(cs, sc), ValidationError);
  sc = small_scenario(0.0);
  sc.dt = 0.03;
  CHECK_THROWS_AS(initial_field(cs, sc), ValidationError);
  sc = small_scenario(0.0);
  sc.references.clear();
  CHECK_THROWS_AS(initial_field(cs, sc), ValidationError);

  sc = small_scenario(0.1);
  auto f = psi_apply(cs, initial_field(cs, sc), sc);
  f.converged = true;
  f.iteration_count = 3;
  const auto dir = std::filesystem::temp_directory_path() / "mfg_test_field";
  std::filesystem::remove_all(dir);
  f.save(dir);
  const auto g = DecouplingField::load(dir, cs.W0);
  CHECK(g.converged);
  CHECK(g.iteration_count == 3);
  REQUIRE(g.table_size() == f.table_size());
  for (std::size_t i = 0; i < f.table_size(); ++i) {
    CHECK(g.values()[i] == f.values()[i]);
    CHECK(g.stderrs()[i] == f.stderrs()[i]);
  }
  CHECK(g.reference(0).points()[5] == f.reference(0).points()[5]);
  std::filesystem::remove_all(dir);
}

TEST_CASE("one psi sweep matches the closed-form coefficient recursion") {
  const auto cs = lq();
  for (double sigma : {0.0, 0.2}) {
    CAPTURE(sigma);
    const auto sc = small_scenario(sigma);
    const auto w = initial_field(cs, sc);
    const auto out = psi_apply(cs, w, sc);
    const std::size_t K = out.steps();
    const auto expect = testing::lq_psi_sweep(
        kLQ, {std::vector<double>(K + 1, kLQ.p), std::vector<double>(K + 1, kLQ.p_bar)}, sc.dt);
    double worst = 0.0;
    for (std::size_t k = 0; k <= K; ++k)
      for (std::size_t l = 0; l < out.n_shift_nodes(); ++l) {
        const double m = out.node_measure(0, l).mean()[0];
        for (std::size_t j = 0; j < out.n_nodes(); ++j) {
          const double x = out.node_point(j)[0];
          worst = std::max(worst, std::fabs(out.values()[out.index(0, k, l, j, 0)] -
                                            (expect.alpha[k] * x + expect.beta[k] * m)));
        }
      }
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("noiseless Picard iteration converges to the discrete fixed point") {
  const auto cs = lq();
  const auto sc = small_scenario(0.0);
  const auto f = picard_solve(cs, sc, {1e-12, 100});
  CHECK(f.converged);
  CHECK_FALSE(f.tol_raised);
  const auto fp = testing::lq_discrete_fixed_point(kLQ, sc.dt, 200);
  const auto path = riccati_solve(LQParams{1.0, 0.25, 1.0, 0.25, sc.T}, 1e-4);
  double worst = 0.0, vs_oracle = 0.0;
  for (std::size_t k = 0; k <= f.steps(); ++k)
    for (std::size_t l = 0; l < f.n_shift_nodes(); ++l) {
      const double m = f.node_measure(0, l).mean()[0];
      for (std::size_t j = 0; j < f.n_nodes(); ++j) {
        const double x = f.node_point(j)[0];
        const double v = f.values()[f.index(0, k, l, j, 0)];
        worst = std::max(worst, std::fabs(v - (fp.alpha[k] * x + fp.beta[k] * m)));
        const double t = static_cast<double>(k) * sc.dt;
        vs_oracle = std::max(vs_oracle, std::fabs(v - (path.a_at(t) * x + path.b_at(t) * m)));
      }
    }
  CHECK(worst < 1e-10);
  // what remains is the time-discretization bias
  CHECK(vs_oracle < 1e-3);
}

TEST_CASE("Picard history and non-convergence flag") {
  const auto cs = lq();
  const auto sc = small_scenario(0.1);
  const auto f = picard_solve(cs, sc, {1e-12, 2});
  CHECK_FALSE(f.converged);
  CHECK(f.iteration_count == 2);
  REQUIRE(f.history.size() == 2);
  CHECK(f.history[1].increment < f.history[0].increment);
  CHECK(f.tol_effective >= 3.0 * f.max_stderr);
  CHECK_THROWS_AS(build_fbsde_paths(f, cs, sc), ConvergenceError);
  CHECK_THROWS_AS(picard_solve(cs, sc, {0.0, 5}), ValidationError);
  CHECK(history_to_csv(f).rfind("iteration,", 0) == 0);
}

TEST_CASE("decoupling field satisfies the dynamic programming relation") {
  const auto cs = lq();
  auto sc = small_scenario(0.1, 16);
  sc.N = 400;
  const auto W = picard_solve(cs, sc, {1e-8, 50});
  REQUIRE(W.converged);
  const std::size_t K = W.steps();
  const auto noise = make_noise_tables(K, sc.N, 64, 1, sc.sigma_x, sc.seed + 1);
  const auto nodes = W.all_node_points();
  const std::size_t k = K, s = 4;
  const double t = static_cast<double>(k) * sc.dt;
  const auto& mu = W.node_measure(0, 1);
  const auto fk = feynman_kac(cs, W, W, t, s, sc.dt, mu.points(), nodes, sc.sigma_x, noise);
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const double direct = W.values()[W.index(0, k, 1, j, 0)];
    const double se = W.stderrs()[W.index(0, k, 1, j, 0)];
    CAPTURE(j);
    CHECK(std::fabs(fk.value[j] - direct) <= 2.0 * (fk.stderr[j] + se) + 1e-6);
  }
}

TEST_CASE("psi operator is independent of the thread count") {
  const auto cs = lq();
  const auto sc = small_scenario(0.1);
  const unsigned before = max_threads();
  set_max_threads(1);
  const auto a = psi_apply(cs, initial_field(cs, sc), sc);
  set_max_threads(3);
  const auto b = psi_apply(cs, initial_field(cs, sc), sc);
  set_max_threads(before);
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
}

TEST_CASE("noise tables") {
  const auto t = make_noise_tables(3, 5, 6, 1, 0.1, 2);
  CHECK(t.R == 6);
  CHECK(t.antithetic);
  CHECK(t.flow[0] == -t.flow[1]);
  CHECK(t.tagged[2] == -t.tagged[3]);
  CHECK(t.flow[1 * 5 + 2] == particle_normal(2, 2, 1));
  const auto quiet = make_noise_tables(3, 5, 6, 1, 0.0, 2);
  CHECK(quiet.R == 1);
  CHECK(quiet.flow.empty());
}

TEST_CASE("FBSDE residual of a converged field is small") {
  const auto cs = lq();
  auto sc = small_scenario(0.1);
  const auto W = picard_solve(cs, sc, {1e-8, 50});
  REQUIRE(W.converged);
  const auto paths = build_fbsde_paths(W, cs, sc);
  CHECK(paths.flow.steps() == W.steps());
  for (std::size_t k = 0; k < paths.residual_mean.size(); ++k)
    CHECK(std::fabs(paths.residual_mean[k]) < 0.05 * sc.dt + 4.0 * paths.residual_stderr[k]);
}
