#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfg/measures.hpp"
#include "mfg/rng.hpp"

namespace mfg {

/// (x, mu) -> R^d, evaluated on a batch of points sharing one law.
class MeasureMap {
 public:
  virtual ~MeasureMap() = default;
  virtual void apply(std::span<const double> xs, const EmpiricalMeasure& mu, std::span<double> out) const = 0;

  std::vector<double> operator()(std::span<const double> x, const EmpiricalMeasure& mu) const;
  /// Values at the atoms of mu under the law mu.
  std::vector<double> lifted(const EmpiricalMeasure& mu) const;
};

/// (x, mu, u) -> R^d.
class ControlMap {
 public:
  virtual ~ControlMap() = default;
  virtual void apply(std::span<const double> xs, const EmpiricalMeasure& mu, std::span<const double> us,
                     std::span<double> out) const = 0;

  std::vector<double> operator()(std::span<const double> x, const EmpiricalMeasure& mu,
                                 std::span<const double> u) const;
};

using MeasureMapPtr = std::shared_ptr<const MeasureMap>;
using ControlMapPtr = std::shared_ptr<const ControlMap>;

using PointMeasureFn = std::function<void(std::span<const double> x, const EmpiricalMeasure& mu, std::span<double> out)>;
using PointControlFn = std::function<void(std::span<const double> x, const EmpiricalMeasure& mu,
                                          std::span<const double> u, std::span<double> out)>;

MeasureMapPtr make_measure_map(std::size_t dim, PointMeasureFn fn);
ControlMapPtr make_control_map(std::size_t dim, PointControlFn fn);

/// out = cx*x + cm*mean(mu) + cu*u + c0, componentwise.
struct Affine {
  double cx = 0.0, cm = 0.0, cu = 0.0, c0 = 0.0;
};
MeasureMapPtr affine_measure_map(Affine a);
ControlMapPtr affine_control_map(Affine a);
std::optional<Affine> as_affine(const MeasureMap& m);
std::optional<Affine> as_affine(const ControlMap& m);

enum class RegimeKind { None, JointMonotone, WeakStrongInX, StrongInX, WeakStrongInW, StrongInW };

struct Regime {
  RegimeKind kind = RegimeKind::None;
  double alpha = 0.0;
  double L = 0.0;
  std::optional<double> a0;  // terminal coercivity, certified separately
};

std::string to_string(RegimeKind k);
RegimeKind regime_from_string(const std::string& s);

using Params = std::map<std::string, double>;

struct CoefficientSet {
  std::string family;
  std::size_t dim = 1;
  ControlMapPtr F;
  ControlMapPtr G;
  MeasureMapPtr W0;
  double growth_constant = 1.0;
  Regime regime;
  double gamma = 1.0;
  Params params;
};

using FamilyCtor = std::function<CoefficientSet(std::size_t dim, const Params& params)>;
void register_family(const std::string& name, FamilyCtor ctor);
std::vector<std::string> family_names();
bool has_family(const std::string& name);
CoefficientSet make_coefficients(const std::string& family, std::size_t dim, const Params& params);

/// Coefficient maps (x, mu) -> R^d used as regularization inputs.
struct BaseMap {
  MeasureMapPtr map;
  std::optional<double> growth_constant;  // known constant of the family, if any
};
using BaseMapCtor = std::function<BaseMap(std::size_t dim, const Params& params)>;
void register_base_map(const std::string& name, BaseMapCtor ctor);
std::vector<std::string> base_map_names();
BaseMap make_base_map(const std::string& name, std::size_t dim, const Params& params);

double clipped_cubic(double x, double radius);

// ---- sampling -------------------------------------------------------------------

struct MixtureComponent {
  double weight = 1.0;
  std::vector<double> mean;  // empty means the origin
  double std = 1.0;
};

struct SamplerSpec {
  enum class Kind { GaussianMixture, UniformBox };
  Kind kind = Kind::GaussianMixture;
  std::size_t dim = 1;
  std::size_t atoms = 16;
  std::vector<MixtureComponent> components{MixtureComponent{}};
  double heavy_tail_df = 0.0;    // Student-t degrees of freedom, 0 disables
  double heavy_tail_prob = 0.0;  // probability an atom is drawn heavy-tailed
  double lo = -1.0, hi = 1.0;    // UniformBox bounds
  double u_scale = 1.0;          // scale of sampled controls
};

std::vector<double> sample_points(const SamplerSpec& spec, RngStream& rng, std::size_t n);
EmpiricalMeasure sample_cloud(const SamplerSpec& spec, RngStream& rng);

struct LiftedSample {
  EmpiricalMeasure x_cloud;
  std::vector<double> u_values;
};

// ---- probes ---------------------------------------------------------------------

struct MonotonicityReport {
  double min_quotient = 0.0;
  std::size_t n_pairs = 0;
  std::size_t worst_pair_index = 0;
  std::uint64_t worst_pair_seed = 0;
  double tolerance = 1e-10;
  bool passed = false;
};

inline constexpr double kProbeTolerance = 1e-10;

/// Seed of the substream that generates pair i; the witness of a report.
std::uint64_t pair_seed(std::uint64_t seed, std::size_t index);

/// Deterministic pair (X, Y) with shared weights for pair index i.
std::pair<EmpiricalMeasure, EmpiricalMeasure> sample_cloud_pair(const SamplerSpec& spec, std::uint64_t seed,
                                                                std::size_t index);
/// Same, with controls (U, V) aligned to the atoms.
std::pair<LiftedSample, LiftedSample> sample_lifted_pair(const SamplerSpec& spec, std::uint64_t seed,
                                                         std::size_t index);

MonotonicityReport probe_l2_monotone(const MeasureMap& w0, const SamplerSpec& sampler, std::size_t n_pairs,
                                     std::uint64_t seed, double tolerance = kProbeTolerance);
MonotonicityReport probe_joint_monotone(const ControlMap& f, const ControlMap& g, const SamplerSpec& sampler,
                                        std::size_t n_pairs, std::uint64_t seed, double tolerance = kProbeTolerance);
/// min <dW0, dX> / |dW0|^2; pairs with dW0 = 0 are skipped.
MonotonicityReport probe_terminal_coercivity(const MeasureMap& w0, const SamplerSpec& sampler, std::size_t n_pairs,
                                             std::uint64_t seed);

enum class Direction { InX, InW };

struct WeakStrongFit {
  double alpha = 0.0;
  double L = 0.0;
};

WeakStrongFit fit_weak_strong(const ControlMap& f, const ControlMap& g, const SamplerSpec& sampler,
                              std::size_t n_pairs, std::uint64_t seed, Direction direction);

double holder_norm_gamma(double a, double gamma);

bool certify_growth(const CoefficientSet& cs, const SamplerSpec& sampler, std::size_t n_samples, std::uint64_t seed);

/// max |F(X) - F(Y)| / |X - Y| in the lifted norm over sampled pairs.
double lifted_lipschitz_quotient(const MeasureMap& f, const SamplerSpec& sampler, std::size_t n_pairs,
                                 std::uint64_t seed);

}  // namespace mfg
