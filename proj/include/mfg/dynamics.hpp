#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mfg/coefficients.hpp"
#include "mfg/field.hpp"
#include "mfg/rng.hpp"

namespace mfg {

/// Particle system on a uniform time grid; paths are stored step-major.
struct MeasureFlow {
  std::vector<double> times;
  std::size_t n_particles = 0;
  std::size_t dim = 1;
  std::vector<double> paths;  // (K+1) x N x d
  std::uint64_t seed = 0;

  std::size_t steps() const { return times.size() - 1; }
  std::span<const double> states(std::size_t k) const {
    return {paths.data() + k * n_particles * dim, n_particles * dim};
  }
  double particle(std::size_t i, std::size_t k, std::size_t c) const {
    return paths[(k * n_particles + i) * dim + c];
  }
  EmpiricalMeasure measure_at(std::size_t k) const;
};

/// Brownian increment (unit variance) of particle i: particles 2p and 2p+1 carry mirrored draws
/// of the stream (seed, 2p); an unpaired last particle keeps its own.
inline double particle_normal(std::uint64_t seed, std::size_t i, std::uint64_t counter) {
  const CounterRng rng(seed, i & ~std::size_t{1});
  return (i & 1) ? -rng.normal(counter) : rng.normal(counter);
}

/// Number of steps of size dt in [0, T]; throws unless dt divides T within 1e-12.
std::size_t step_count(double T, double dt);

/// N atoms drawn from mu0 (mu0 itself when it already is a uniform N-atom cloud).
std::vector<double> initial_particles(const EmpiricalMeasure& mu0, std::size_t N, std::uint64_t seed);

struct SimulationSpec {
  double T = 1.0;
  double dt = 0.01;
  double sigma_x = 0.0;
  double beta = 0.0;  // common noise intensity
  std::uint64_t seed = 0;
};

/// Euler-Maruyama with drift -F(x, m_s, W(T - s, x, m_s)) from the given particles.
MeasureFlow simulate_particles(const CoefficientSet& cs, const Field& W, std::vector<double> x0,
                               const SimulationSpec& spec);

MeasureFlow simulate_mckean(const CoefficientSet& cs, const Field& W, const EmpiricalMeasure& mu0, double T, double dt,
                            std::size_t N, double sigma_x, std::uint64_t seed);

/// All particles share one extra Brownian path scaled by sqrt(2 beta).
MeasureFlow simulate_conditional_common_noise(const CoefficientSet& cs, const Field& W, const EmpiricalMeasure& mu0,
                                              double T, double dt, std::size_t N, double sigma_x, double beta,
                                              std::uint64_t seed);

/// Particles driven along a prescribed measure flow (the law is not updated from the particles).
MeasureFlow simulate_frozen(const CoefficientSet& cs, const Field& W, std::vector<double> x0,
                            const std::vector<EmpiricalMeasure>& flow, const SimulationSpec& spec);

// ---- theta process ------------------------------------------------------------

struct ThetaSpec {
  std::string drift = "zero";      // zero | linear | tanh
  std::string diffusion = "zero";  // zero | identity | scaled
  double kappa = 1.0;
  double scale = 1.0;
};

struct ThetaPath {
  std::vector<double> times;
  std::size_t dim = 1;
  std::vector<double> values;  // (K+1) x n
  std::string drift_name, diffusion_name;

  std::span<const double> at(std::size_t k) const { return {values.data() + k * dim, dim}; }
};

std::vector<std::string> theta_drift_names();
std::vector<std::string> theta_diffusion_names();

ThetaPath simulate_theta(const ThetaSpec& spec, std::span<const double> theta0, double T, double dt,
                         std::uint64_t seed);

// ---- common noise change of variables -------------------------------------------

/// W(t, x, theta, mu).
class NoiseField {
 public:
  virtual ~NoiseField() = default;
  virtual void evaluate(double t, std::span<const double> xs, std::span<const double> theta,
                        const EmpiricalMeasure& mu, std::span<double> out) const = 0;
  std::vector<double> at(double t, std::span<const double> x, std::span<const double> theta,
                         const EmpiricalMeasure& mu) const;
};
using NoiseFieldPtr = std::shared_ptr<const NoiseField>;

/// (t, x, theta, mu) -> W(t, x + theta, (id + theta)# mu).
NoiseFieldPtr common_noise_wrap(FieldPtr W);

// ---- diagnostics of a flow ----------------------------------------------------

struct GrowthReport {
  double e2_initial = 0.0;
  double sup_e2 = 0.0;
  double constant = 0.0;            // sup_s E2(m_s) / (1 + E2(m_0))
  double continuity_ratio = 0.0;    // max |X_t - X_s| / (sqrt(t - s) (1 + |X_0|))
};

GrowthReport growth_report(const MeasureFlow& flow);

/// Directory of per-time clouds plus manifest.json; every stride-th time is written.
void write_flow(const std::filesystem::path& dir, const MeasureFlow& flow, const std::string& config_hash,
                std::size_t stride = 1);

}  // namespace mfg
