#include <algorithm>
#include <cmath>

#include "mfg/error.hpp"
#include "mfg/io.hpp"
#include "mfg/parallel.hpp"
#include "mfg/rng.hpp"
#include "mfg/simd/kernels.hpp"
#include "mfg/solver.hpp"

namespace mfg {

NoiseTables make_noise_tables(std::size_t K, std::size_t N, std::size_t M, std::size_t dim, double sigma_x,
                              std::uint64_t seed) {
  NoiseTables t;
  t.K = K;
  t.N = N;
  t.dim = dim;
  if (!(sigma_x > 0.0)) {
    t.R = 1;
    return t;
  }
  const std::size_t P = std::max<std::size_t>(1, M / 2);
  t.R = 2 * P;
  t.antithetic = true;
  t.flow.resize(K * N * dim);
  parallel_for(N, [&](std::size_t i) {
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t c = 0; c < dim; ++c) t.flow[(k * N + i) * dim + c] = particle_normal(seed, i, k * dim + c);
  });
  t.tagged.resize(K * t.R * dim);
  const std::uint64_t tag_seed = mix64(seed ^ streams::kTagged);
  parallel_for(P, [&](std::size_t p) {
    const CounterRng rng(tag_seed, p);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t c = 0; c < dim; ++c) {
        const double z = rng.normal(k * dim + c);
        t.tagged[(k * t.R + 2 * p) * dim + c] = z;
        t.tagged[(k * t.R + 2 * p + 1) * dim + c] = -z;
      }
  });
  return t;
}

std::vector<EmpiricalMeasure> resample_references(const std::vector<EmpiricalMeasure>& refs, std::size_t N,
                                                  std::uint64_t seed) {
  std::vector<EmpiricalMeasure> out;
  out.reserve(refs.size());
  for (std::size_t r = 0; r < refs.size(); ++r) {
    const std::uint64_t s = r == 0 ? seed : mix64(seed ^ mix64(streams::kReference + r));
    out.push_back(EmpiricalMeasure::uniform(refs[r].dim(), initial_particles(refs[r], N, s)));
  }
  return out;
}

namespace {

void validate(const CoefficientSet& cs, const SolverScenario& sc) {
  if (sc.references.empty()) throw ValidationError("scenario needs at least one initial measure");
  for (const auto& r : sc.references)
    if (r.dim() != cs.dim) throw DimensionError("initial measure dimension differs from the coefficients");
  if (sc.N < 2) throw ValidationError("need at least 2 flow particles");
  if (sc.M < 1) throw ValidationError("need at least 1 tagged replica");
  if (!(sc.sigma_x >= 0.0) || !std::isfinite(sc.sigma_x)) throw ValidationError("sigma_x must be nonnegative");
}

DecouplingField empty_layout(const CoefficientSet& cs, const SolverScenario& sc) {
  DecouplingField f(cs.dim, sc.T, sc.dt, sc.grid, resample_references(sc.references, sc.N, sc.seed), cs.W0);
  f.config_hash = sc.config_hash;
  return f;
}

void check_finite(std::span<const double> v, std::size_t d, double s, const char* what) {
  for (std::size_t j = 0; j < v.size(); ++j)
    if (!std::isfinite(v[j]))
      throw SimulationError(std::string("non-finite ") + what + " at s = " + io::fmt(s) + ", particle " +
                                std::to_string(j / d),
                            s, j / d);
}

}  // namespace

DecouplingField initial_field(const CoefficientSet& cs, const SolverScenario& sc) {
  validate(cs, sc);
  DecouplingField f = empty_layout(cs, sc);
  const auto nodes = f.all_node_points();
  const std::size_t width = f.n_nodes() * cs.dim;
  std::vector<double> w(width);
  for (std::size_t r = 0; r < f.n_references(); ++r)
    for (std::size_t l = 0; l < f.n_shift_nodes(); ++l) {
      cs.W0->apply(nodes, f.node_measure(r, l), w);
      for (std::size_t k = 0; k <= f.steps(); ++k)
        std::copy(w.begin(), w.end(), f.values().begin() + static_cast<std::ptrdiff_t>(f.index(r, k, l, 0, 0)));
    }
  return f;
}

FeynmanKacResult feynman_kac(const CoefficientSet& cs, const Field& w_in, const Field& terminal, double t,
                             std::size_t steps, double dt, std::span<const double> flow_particles,
                             std::span<const double> xs, double sigma_x, const NoiseTables& noise) {
  const std::size_t d = cs.dim;
  if (flow_particles.size() % d != 0 || xs.size() % d != 0) throw DimensionError("particle arrays do not match the dimension");
  const std::size_t N = flow_particles.size() / d;
  const std::size_t P = xs.size() / d;
  const bool noisy = sigma_x > 0.0;
  const std::size_t R = noisy ? noise.R : 1;
  if (noisy && (noise.N != N || noise.K < steps || noise.dim != d || noise.tagged.empty()))
    throw ValidationError("noise tables do not cover this Feynman-Kac run");

  // layout: [flow N | point p, replica q] rows of d
  const std::size_t nf = N * d;
  const std::size_t nt = P * R * d;
  const std::size_t n = nf + nt;
  std::vector<double> x(n), u(n), drift(n), g(nt), acc(nt, 0.0), z(noisy ? n : 0);
  std::copy(flow_particles.begin(), flow_particles.end(), x.begin());
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t q = 0; q < R; ++q)
      std::copy_n(xs.begin() + static_cast<std::ptrdiff_t>(p * d), d, x.begin() + static_cast<std::ptrdiff_t>(nf + (p * R + q) * d));
  EmpiricalMeasure m = EmpiricalMeasure::uniform(d, {flow_particles.begin(), flow_particles.end()});
  const auto& kern = simd::active();
  const double scale = std::sqrt(2.0 * sigma_x * dt);
  const std::span<const double> tag_x(x.data() + nf, nt);

  for (std::size_t j = 0; j < steps; ++j) {
    const double tau = t - static_cast<double>(j) * dt;
    w_in.evaluate(tau, x, m, u);
    cs.F->apply(x, m, u, drift);
    cs.G->apply(tag_x, m, std::span<const double>(u.data() + nf, nt), g);
    check_finite(drift, d, static_cast<double>(j) * dt, "drift");
    kern.axpy(dt, g.data(), acc.data(), nt);
    if (noisy) {
      std::copy_n(noise.flow.data() + j * nf, nf, z.data());
      const double* zt = noise.tagged.data() + j * noise.R * d;
      for (std::size_t p = 0; p < P; ++p) std::copy_n(zt, R * d, z.data() + nf + p * R * d);
    }
    kern.euler_update(x.data(), drift.data(), noisy ? z.data() : nullptr, dt, scale, n);
    std::copy_n(x.data(), nf, m.mutable_points().data());
    m.refresh();
  }
  std::vector<double> v(nt);
  terminal.evaluate(t - static_cast<double>(steps) * dt, tag_x, m, v);
  kern.axpy(1.0, acc.data(), v.data(), nt);
  check_finite(v, d, static_cast<double>(steps) * dt, "value");

  FeynmanKacResult res;
  res.value.assign(P * d, 0.0);
  res.stderr.assign(P * d, 0.0);
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t c = 0; c < d; ++c) {
      auto at = [&](std::size_t q) { return v[(p * R + q) * d + c]; };
      if (R == 1) {
        res.value[p * d + c] = at(0);
        continue;
      }
      const std::size_t pairs = R / 2;
      double s = 0.0;
      for (std::size_t q = 0; q < pairs; ++q) s += 0.5 * (at(2 * q) + at(2 * q + 1));
      const double mean = s / static_cast<double>(pairs);
      double ss = 0.0;
      for (std::size_t q = 0; q < pairs; ++q) {
        const double e = 0.5 * (at(2 * q) + at(2 * q + 1)) - mean;
        ss += e * e;
      }
      res.value[p * d + c] = mean;
      res.stderr[p * d + c] = pairs > 1 ? std::sqrt(ss / static_cast<double>(pairs - 1) / static_cast<double>(pairs))
                                        : 0.5 * std::fabs(at(0) - at(1));
    }
  return res;
}

DecouplingField psi_apply(const CoefficientSet& cs, const Field& w_in, const SolverScenario& sc,
                          const NoiseTables& noise) {
  validate(cs, sc);
  DecouplingField out = empty_layout(cs, sc);
  const std::size_t K = out.steps();
  const std::size_t Lc = out.n_shift_nodes();
  const std::size_t width = out.n_nodes() * cs.dim;
  const auto nodes = out.all_node_points();
  const auto w0 = constant_in_time(cs.dim, cs.W0);

  // k = 0 is the terminal map itself
  std::vector<double> w(width);
  for (std::size_t r = 0; r < out.n_references(); ++r)
    for (std::size_t l = 0; l < Lc; ++l) {
      cs.W0->apply(nodes, out.node_measure(r, l), w);
      std::copy(w.begin(), w.end(), out.values().begin() + static_cast<std::ptrdiff_t>(out.index(r, 0, l, 0, 0)));
    }
  if (K == 0) return out;

  // longest horizons first for load balance
  const std::size_t tasks = out.n_references() * Lc * K;
  parallel_for_dynamic(tasks, [&](std::size_t task) {
    const std::size_t k = K - task % K;
    const std::size_t rl = task / K;
    const std::size_t r = rl / Lc, l = rl % Lc;
    const double t = static_cast<double>(k) * sc.dt;
    const auto res = feynman_kac(cs, w_in, *w0, t, k, sc.dt, out.node_measure(r, l).points(), nodes, sc.sigma_x, noise);
    const auto off = static_cast<std::ptrdiff_t>(out.index(r, k, l, 0, 0));
    std::copy(res.value.begin(), res.value.end(), out.values().begin() + off);
    std::copy(res.stderr.begin(), res.stderr.end(), out.stderrs().begin() + off);
  });
  return out;
}

DecouplingField psi_apply(const CoefficientSet& cs, const Field& w_in, const SolverScenario& sc) {
  validate(cs, sc);
  const std::size_t K = step_count(sc.T, sc.dt);
  return psi_apply(cs, w_in, sc, make_noise_tables(K, sc.N, sc.M, cs.dim, sc.sigma_x, sc.seed));
}

DecouplingField picard_solve(const CoefficientSet& cs, const SolverScenario& sc_in, const PicardOptions& opts) {
  validate(cs, sc_in);
  if (!(opts.tol > 0.0)) throw ValidationError("Picard tolerance must be positive");
  if (opts.max_iter < 1) throw ValidationError("Picard needs max_iter >= 1");
  SolverScenario sc = sc_in;
  sc.references = resample_references(sc_in.references, sc.N, sc.seed);
  const std::size_t K = step_count(sc.T, sc.dt);
  const NoiseTables noise = make_noise_tables(K, sc.N, sc.M, cs.dim, sc.sigma_x, sc.seed);

  DecouplingField W = initial_field(cs, sc);
  std::vector<PicardRecord> history;
  bool converged = false;
  double tol_eff = opts.tol;
  for (int it = 1; it <= opts.max_iter; ++it) {
    DecouplingField Wn = psi_apply(cs, W, sc, noise);
    const auto a = W.values();
    const auto b = Wn.values();
    PicardRecord rec;
    rec.iteration = it;
    for (std::size_t i = 0; i < a.size(); ++i) rec.increment = std::max(rec.increment, std::fabs(b[i] - a[i]));
    const std::size_t width = Wn.n_nodes() * cs.dim;
    for (std::size_t blk = 0; blk + width <= a.size(); blk += width) {
      double s = 0.0;
      for (std::size_t i = blk; i < blk + width; ++i) s += (b[i] - a[i]) * (b[i] - a[i]);
      rec.lifted_increment = std::max(rec.lifted_increment, std::sqrt(s / static_cast<double>(Wn.n_nodes())));
    }
    for (double e : Wn.stderrs()) rec.max_stderr = std::max(rec.max_stderr, e);
    tol_eff = std::max(opts.tol, 3.0 * rec.max_stderr);
    history.push_back(rec);
    W = std::move(Wn);
    if (!std::isfinite(rec.increment)) throw ConvergenceError("Picard increment is not finite", rec.increment, it);
    if (rec.increment <= tol_eff) {
      converged = true;
      break;
    }
  }
  W.history = std::move(history);
  W.iteration_count = static_cast<int>(W.history.size());
  W.final_increment = W.history.back().increment;
  W.max_stderr = W.history.back().max_stderr;
  W.converged = converged;
  W.tol = opts.tol;
  W.tol_effective = tol_eff;
  W.tol_raised = tol_eff > opts.tol;
  W.config_hash = sc_in.config_hash;
  return W;
}

FBSDEPaths build_fbsde_paths(const DecouplingField& field, const CoefficientSet& cs, const SolverScenario& sc,
                             std::size_t reference) {
  if (!field.converged)
    throw ConvergenceError("FBSDE paths need a converged field", field.final_increment, field.iteration_count);
  return build_fbsde_paths(static_cast<const Field&>(field), cs, sc, reference);
}

FBSDEPaths build_fbsde_paths(const Field& field, const CoefficientSet& cs, const SolverScenario& sc,
                             std::size_t reference) {
  validate(cs, sc);
  if (reference >= sc.references.size()) throw ValidationError("reference index out of range");
  const auto refs = resample_references({sc.references[reference]}, sc.N, sc.seed);
  FBSDEPaths out;
  out.flow = simulate_particles(cs, field, {refs[0].points().begin(), refs[0].points().end()},
                                {sc.T, sc.dt, sc.sigma_x, 0.0, sc.seed});
  const std::size_t K = out.flow.steps(), N = sc.N, d = cs.dim, n = N * d;
  out.w_values.resize((K + 1) * n);
  for (std::size_t k = 0; k <= K; ++k) {
    const auto m = out.flow.measure_at(k);
    field.evaluate(sc.T - out.flow.times[k], out.flow.states(k), m,
                   std::span<double>(out.w_values.data() + k * n, n));
  }
  out.residual_mean.assign(K * d, 0.0);
  out.residual_stderr.assign(K * d, 0.0);
  std::vector<double> g(n);
  for (std::size_t k = 0; k < K; ++k) {
    const auto m = out.flow.measure_at(k);
    const std::span<const double> wk(out.w_values.data() + k * n, n);
    cs.G->apply(out.flow.states(k), m, wk, g);
    const double h = out.flow.times[k + 1] - out.flow.times[k];
    for (std::size_t c = 0; c < d; ++c) {
      double s = 0.0, ss = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double e = out.w_values[(k + 1) * n + i * d + c] - wk[i * d + c] + g[i * d + c] * h;
        s += e;
        ss += e * e;
      }
      const double mean = s / static_cast<double>(N);
      const double var = std::max(0.0, (ss - static_cast<double>(N) * mean * mean) / static_cast<double>(N - 1));
      out.residual_mean[k * d + c] = mean;
      out.residual_stderr[k * d + c] = std::sqrt(var / static_cast<double>(N));
    }
  }
  return out;
}

}  // namespace mfg
