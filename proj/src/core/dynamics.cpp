#include "mfg/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "json.hpp"
#include "mfg/error.hpp"
#include "mfg/io.hpp"
#include "mfg/parallel.hpp"
#include "mfg/simd/kernels.hpp"

namespace mfg {

EmpiricalMeasure MeasureFlow::measure_at(std::size_t k) const {
  auto s = states(k);
  return EmpiricalMeasure::uniform(dim, {s.begin(), s.end()});
}

std::size_t step_count(double T, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be positive");
  if (!(T >= 0.0) || !std::isfinite(T)) throw ValidationError("horizon T must be nonnegative");
  const double k = std::round(T / dt);
  if (std::fabs(k * dt - T) > 1e-12) throw ValidationError("dt = " + io::fmt(dt) + " does not divide T = " + io::fmt(T));
  return static_cast<std::size_t>(k);
}

std::vector<double> initial_particles(const EmpiricalMeasure& mu0, std::size_t N, std::uint64_t seed) {
  const std::size_t d = mu0.dim();
  if (mu0.is_uniform() && mu0.size() == N) return {mu0.points().begin(), mu0.points().end()};
  std::vector<double> cdf(mu0.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < mu0.size(); ++j) cdf[j] = (acc += mu0.weight(j));
  const CounterRng rng(seed, streams::kResample);
  std::vector<double> x(N * d);
  for (std::size_t i = 0; i < N; ++i) {
    const double u = rng.uniform(i) * acc;
    auto j = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    j = std::min(j, mu0.size() - 1);
    std::copy_n(mu0.point(j).begin(), d, x.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return x;
}

namespace {

void validate(std::size_t N, const SimulationSpec& spec) {
  if (N < 2) throw ValidationError("need at least 2 particles");
  if (!(spec.sigma_x >= 0.0) || !(spec.beta >= 0.0)) throw ValidationError("noise levels must be nonnegative");
}

template <class LawAt>
MeasureFlow run(const CoefficientSet& cs, const Field& W, std::vector<double> x0, const SimulationSpec& spec,
                LawAt law_at) {
  const std::size_t d = cs.dim;
  if (x0.empty() || x0.size() % d != 0) throw DimensionError("initial particles do not match the coefficient dimension");
  const std::size_t N = x0.size() / d;
  validate(N, spec);
  const std::size_t K = step_count(spec.T, spec.dt);
  const std::size_t n = N * d;
  MeasureFlow flow;
  flow.n_particles = N;
  flow.dim = d;
  flow.seed = spec.seed;
  flow.times.resize(K + 1);
  for (std::size_t k = 0; k <= K; ++k) flow.times[k] = static_cast<double>(k) * spec.dt;
  flow.times[K] = spec.T;
  flow.paths.resize((K + 1) * n);
  std::copy(x0.begin(), x0.end(), flow.paths.begin());

  std::vector<double> u(n), drift(n), noise(spec.sigma_x > 0.0 ? n : 0);
  const double scale = std::sqrt(2.0 * spec.sigma_x * spec.dt);
  const double common_scale = std::sqrt(2.0 * spec.beta * spec.dt);
  const CounterRng common(spec.seed, streams::kCommonNoise);
  const auto& kern = simd::active();
  for (std::size_t k = 0; k < K; ++k) {
    const double* xk = flow.paths.data() + k * n;
    double* xn = flow.paths.data() + (k + 1) * n;
    const EmpiricalMeasure& m = law_at(k, std::span<const double>(xk, n));
    const double tau = static_cast<double>(K - k) * spec.dt;
    const std::span<const double> xs(xk, n);
    W.evaluate(tau, xs, m, u);
    cs.F->apply(xs, m, u, drift);
    for (std::size_t j = 0; j < n; ++j)
      if (!std::isfinite(drift[j]))
        throw SimulationError("non-finite drift at s = " + io::fmt(flow.times[k]) + ", particle " + std::to_string(j / d),
                              flow.times[k], j / d);
    if (!noise.empty()) {
      parallel_for(N, [&](std::size_t i) {
        for (std::size_t c = 0; c < d; ++c) noise[i * d + c] = particle_normal(spec.seed, i, k * d + c);
      });
    }
    std::copy(xk, xk + n, xn);
    kern.euler_update(xn, drift.data(), noise.empty() ? nullptr : noise.data(), spec.dt, scale, n);
    if (spec.beta > 0.0) {
      for (std::size_t c = 0; c < d; ++c) {
        const double shift = common_scale * common.normal(k * d + c);
        for (std::size_t i = 0; i < N; ++i) xn[i * d + c] += shift;
      }
    }
  }
  return flow;
}

}  // namespace

MeasureFlow simulate_particles(const CoefficientSet& cs, const Field& W, std::vector<double> x0,
                               const SimulationSpec& spec) {
  std::optional<EmpiricalMeasure> current;
  return run(cs, W, std::move(x0), spec, [&](std::size_t, std::span<const double> xk) -> const EmpiricalMeasure& {
    current = EmpiricalMeasure::uniform(cs.dim, {xk.begin(), xk.end()});
    return *current;
  });
}

MeasureFlow simulate_mckean(const CoefficientSet& cs, const Field& W, const EmpiricalMeasure& mu0, double T, double dt,
                            std::size_t N, double sigma_x, std::uint64_t seed) {
  return simulate_conditional_common_noise(cs, W, mu0, T, dt, N, sigma_x, 0.0, seed);
}

MeasureFlow simulate_conditional_common_noise(const CoefficientSet& cs, const Field& W, const EmpiricalMeasure& mu0,
                                              double T, double dt, std::size_t N, double sigma_x, double beta,
                                              std::uint64_t seed) {
  if (mu0.dim() != cs.dim) throw DimensionError("initial measure dimension differs from the coefficients");
  if (N < 2) throw ValidationError("need at least 2 particles");
  return simulate_particles(cs, W, initial_particles(mu0, N, seed), {T, dt, sigma_x, beta, seed});
}

MeasureFlow simulate_frozen(const CoefficientSet& cs, const Field& W, std::vector<double> x0,
                            const std::vector<EmpiricalMeasure>& flow, const SimulationSpec& spec) {
  const std::size_t K = step_count(spec.T, spec.dt);
  if (flow.size() < K + 1) throw ValidationError("frozen flow is shorter than the time grid");
  return run(cs, W, std::move(x0), spec,
             [&](std::size_t k, std::span<const double>) -> const EmpiricalMeasure& { return flow[k]; });
}

// ---- theta --------------------------------------------------------------------

std::vector<std::string> theta_drift_names() { return {"linear", "tanh", "zero"}; }
std::vector<std::string> theta_diffusion_names() { return {"identity", "scaled", "zero"}; }

ThetaPath simulate_theta(const ThetaSpec& spec, std::span<const double> theta0, double T, double dt,
                         std::uint64_t seed) {
  const auto dn = theta_drift_names();
  const auto sn = theta_diffusion_names();
  if (std::find(dn.begin(), dn.end(), spec.drift) == dn.end())
    throw ValidationError("unknown theta drift family '" + spec.drift + "'");
  if (std::find(sn.begin(), sn.end(), spec.diffusion) == sn.end())
    throw ValidationError("unknown theta diffusion family '" + spec.diffusion + "'");
  if (theta0.empty()) throw ValidationError("theta0 must be non-empty");
  const std::size_t K = step_count(T, dt);
  const std::size_t n = theta0.size();
  ThetaPath path;
  path.dim = n;
  path.drift_name = spec.drift;
  path.diffusion_name = spec.diffusion;
  path.times.resize(K + 1);
  path.values.resize((K + 1) * n);
  std::copy(theta0.begin(), theta0.end(), path.values.begin());
  const double sigma = spec.diffusion == "zero" ? 0.0 : spec.diffusion == "identity" ? 1.0 : spec.scale;
  const CounterRng rng(seed, streams::kTheta);
  const double sq = std::sqrt(dt);
  for (std::size_t k = 0; k <= K; ++k) path.times[k] = static_cast<double>(k) * dt;
  path.times[K] = T;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t c = 0; c < n; ++c) {
      const double th = path.values[k * n + c];
      double b = 0.0;
      if (spec.drift == "linear") b = spec.kappa * th;
      else if (spec.drift == "tanh") b = spec.kappa * std::tanh(th);
      double next = th - b * dt;
      if (sigma != 0.0) next += sigma * sq * rng.normal(k * n + c);
      path.values[(k + 1) * n + c] = next;
    }
  }
  return path;
}

// ---- common noise wrap ------------------------------------------------------------

std::vector<double> NoiseField::at(double t, std::span<const double> x, std::span<const double> theta,
                                   const EmpiricalMeasure& mu) const {
  std::vector<double> out(x.size());
  evaluate(t, x, theta, mu, out);
  return out;
}

namespace {
class WrappedField final : public NoiseField {
 public:
  explicit WrappedField(FieldPtr w) : w_(std::move(w)) {}
  void evaluate(double t, std::span<const double> xs, std::span<const double> theta, const EmpiricalMeasure& mu,
                std::span<double> out) const override {
    const std::size_t d = mu.dim();
    if (theta.size() != d) throw DimensionError("theta length differs from the state dimension");
    std::vector<double> shifted(xs.begin(), xs.end());
    for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += theta[i % d];
    w_->evaluate(t, shifted, pushforward_shift(mu, theta), out);
  }

 private:
  FieldPtr w_;
};
}  // namespace

NoiseFieldPtr common_noise_wrap(FieldPtr W) { return std::make_shared<WrappedField>(std::move(W)); }

// ---- flow diagnostics -------------------------------------------------------------

GrowthReport growth_report(const MeasureFlow& flow) {
  const std::size_t K = flow.steps(), N = flow.n_particles, d = flow.dim;
  const std::size_t n = N * d;
  std::vector<double> e2(K + 1);
  const auto& kern = simd::active();
  for (std::size_t k = 0; k <= K; ++k) e2[k] = kern.sum_squares(flow.states(k).data(), n) / static_cast<double>(N);
  GrowthReport r;
  r.e2_initial = e2[0];
  r.sup_e2 = *std::max_element(e2.begin(), e2.end());
  r.constant = r.sup_e2 / (1.0 + r.e2_initial);
  const double norm0 = std::sqrt(e2[0]);
  std::vector<double> worst(K + 1, 0.0);
  parallel_for(K + 1, [&](std::size_t a) {
    const auto xa = flow.states(a);
    for (std::size_t b = a + 1; b <= K; ++b) {
      const auto xb = flow.states(b);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += (xb[j] - xa[j]) * (xb[j] - xa[j]);
      const double ratio = std::sqrt(s / static_cast<double>(N)) /
                           (std::sqrt(flow.times[b] - flow.times[a]) * (1.0 + norm0));
      worst[a] = std::max(worst[a], ratio);
    }
  });
  r.continuity_ratio = *std::max_element(worst.begin(), worst.end());
  return r;
}

void write_flow(const std::filesystem::path& dir, const MeasureFlow& flow, const std::string& config_hash,
                std::size_t stride) {
  stride = std::max<std::size_t>(1, stride);
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["seed"] = flow.seed;
  manifest["config_hash"] = config_hash;
  manifest["n_particles"] = flow.n_particles;
  manifest["dim"] = flow.dim;
  auto times = nlohmann::json::array();
  auto files = nlohmann::json::array();
  for (std::size_t k = 0; k <= flow.steps(); k += stride) {
    char name[32];
    std::snprintf(name, sizeof name, "t%05zu.csv", k);
    io::write_measure_csv(dir / name, flow.measure_at(k));
    times.push_back(flow.times[k]);
    files.push_back(name);
  }
  manifest["times"] = times;
  manifest["files"] = files;
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace mfg
