#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mfg/coefficients.hpp"
#include "mfg/dynamics.hpp"
#include "mfg/field.hpp"

namespace mfg {

/// Spatial tensor grid per coordinate plus the mean-shift grid of the measure axis.
struct GridSpec {
  double lo = -2.0;
  double hi = 2.0;
  std::size_t n = 17;
  std::vector<double> shifts{0.0};  // increasing offsets applied to every reference
};

struct SolverScenario {
  double T = 1.0;
  double dt = 0.01;
  std::size_t N = 1000;  // flow particles
  std::size_t M = 100;   // tagged replicas per spatial node (rounded to antithetic pairs)
  double sigma_x = 0.0;
  std::vector<EmpiricalMeasure> references;
  GridSpec grid;
  std::uint64_t seed = 0;
  std::string config_hash;
};

struct PicardOptions {
  double tol = 1e-3;
  int max_iter = 50;
};

struct PicardRecord {
  int iteration = 0;
  double increment = 0.0;          // sup over table nodes
  double lifted_increment = 0.0;   // sup over (reference, time, shift) of the node-averaged L2 increment
  double max_stderr = 0.0;
};

/// Tabulated W(t, x, mu): references x time x mean shifts x spatial nodes x components.
class DecouplingField final : public Field {
 public:
  DecouplingField(std::size_t dim, double T, double dt, GridSpec grid, std::vector<EmpiricalMeasure> references,
                  MeasureMapPtr w0);

  std::size_t dim() const override { return dim_; }
  void evaluate(double t, std::span<const double> xs, const EmpiricalMeasure& mu, std::span<double> out) const override;
  void evaluate_stderr(double t, std::span<const double> xs, const EmpiricalMeasure& mu,
                       std::span<double> out) const override;

  double horizon() const { return T_; }
  double dt() const { return dt_; }
  std::size_t steps() const { return K_; }
  const GridSpec& grid() const { return grid_; }
  std::size_t n_references() const { return refs_.size(); }
  std::size_t n_shift_nodes() const { return n_shift_; }
  std::size_t n_nodes() const { return n_nodes_; }
  std::size_t table_size() const { return values_.size(); }

  const EmpiricalMeasure& reference(std::size_t r) const { return refs_[r]; }
  /// Reference r translated by shift node l.
  const EmpiricalMeasure& node_measure(std::size_t r, std::size_t l) const { return node_measures_[r * n_shift_ + l]; }
  std::vector<double> shift_offset(std::size_t l) const;
  std::vector<double> node_point(std::size_t node) const;
  std::vector<double> all_node_points() const;

  std::size_t index(std::size_t r, std::size_t k, std::size_t l, std::size_t node, std::size_t c) const {
    return (((r * (K_ + 1) + k) * n_shift_ + l) * n_nodes_ + node) * dim_ + c;
  }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> stderrs() { return stderr_; }
  std::span<const double> stderrs() const { return stderr_; }
  const MeasureMapPtr& terminal() const { return w0_; }

  /// Index of the reference whose law is closest to mu (Gaussian proxy on centered laws).
  std::size_t nearest_reference(const EmpiricalMeasure& mu) const;

  // convergence metadata
  int iteration_count = 0;
  double final_increment = 0.0;
  bool converged = false;
  double tol = 0.0;
  double tol_effective = 0.0;
  bool tol_raised = false;
  double max_stderr = 0.0;
  std::vector<PicardRecord> history;
  std::string config_hash;

  void save(const std::filesystem::path& dir) const;
  static DecouplingField load(const std::filesystem::path& dir, MeasureMapPtr w0);

 private:
  void combine(double t, const EmpiricalMeasure& mu, std::span<const double> table, bool absolute,
               std::vector<double>& slice) const;
  void interpolate(std::span<const double> slice, std::span<const double> xs, std::span<double> out) const;

  std::size_t dim_;
  double T_, dt_;
  std::size_t K_;
  GridSpec grid_;
  std::vector<EmpiricalMeasure> refs_;
  std::vector<EmpiricalMeasure> node_measures_;
  MeasureMapPtr w0_;
  std::size_t n_shift_ = 1, n_nodes_ = 1;
  std::vector<double> values_, stderr_;
};

using DecouplingFieldPtr = std::shared_ptr<const DecouplingField>;

/// Common random numbers shared by every application of the psi operator.
struct NoiseTables {
  std::size_t K = 0, N = 0, R = 1, dim = 1;
  bool antithetic = false;
  std::vector<double> flow;    // K x N x d; same draws as simulate_particles with this seed (mirrored pairs)
  std::vector<double> tagged;  // K x R x d, replica 2p+1 is the mirror of 2p
};

NoiseTables make_noise_tables(std::size_t K, std::size_t N, std::size_t M, std::size_t dim, double sigma_x,
                              std::uint64_t seed);

/// Reference clouds resampled to N particles, ready for a field layout.
std::vector<EmpiricalMeasure> resample_references(const std::vector<EmpiricalMeasure>& refs, std::size_t N,
                                                  std::uint64_t seed);

/// Field layout with W(t) = W0 for every t.
DecouplingField initial_field(const CoefficientSet& cs, const SolverScenario& sc);

DecouplingField psi_apply(const CoefficientSet& cs, const Field& w_in, const SolverScenario& sc,
                          const NoiseTables& noise);
DecouplingField psi_apply(const CoefficientSet& cs, const Field& w_in, const SolverScenario& sc);

DecouplingField picard_solve(const CoefficientSet& cs, const SolverScenario& sc, const PicardOptions& opts);

/// E[ terminal(t - tau, Y_tau, m_tau) + int_0^tau G ds ] from (x, mu) with drift built on w_in(t - s);
/// tau = steps * dt. Returns per-point value and standard error.
struct FeynmanKacResult {
  std::vector<double> value;
  std::vector<double> stderr;
};
FeynmanKacResult feynman_kac(const CoefficientSet& cs, const Field& w_in, const Field& terminal, double t,
                             std::size_t steps, double dt, std::span<const double> flow_particles,
                             std::span<const double> xs, double sigma_x, const NoiseTables& noise);

struct FBSDEPaths {
  MeasureFlow flow;
  std::vector<double> w_values;        // (K+1) x N x d, W_s = field(T - s, X_s, m_s)
  std::vector<double> residual_mean;   // K x d
  std::vector<double> residual_stderr; // K x d
};

FBSDEPaths build_fbsde_paths(const DecouplingField& field, const CoefficientSet& cs, const SolverScenario& sc,
                             std::size_t reference = 0);
/// Same construction for any field (no convergence requirement).
FBSDEPaths build_fbsde_paths(const Field& field, const CoefficientSet& cs, const SolverScenario& sc,
                             std::size_t reference = 0);

std::string history_to_csv(const DecouplingField& field);

}  // namespace mfg
