#include "mfg/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "mfg/error.hpp"

namespace mfg {

std::vector<double> MeasureMap::operator()(std::span<const double> x, const EmpiricalMeasure& mu) const {
  std::vector<double> out(x.size());
  apply(x, mu, out);
  return out;
}

std::vector<double> MeasureMap::lifted(const EmpiricalMeasure& mu) const {
  std::vector<double> out(mu.points().size());
  apply(mu.points(), mu, out);
  return out;
}

std::vector<double> ControlMap::operator()(std::span<const double> x, const EmpiricalMeasure& mu,
                                           std::span<const double> u) const {
  std::vector<double> out(x.size());
  apply(x, mu, u, out);
  return out;
}

namespace {

class PointwiseMeasureMap final : public MeasureMap {
 public:
  PointwiseMeasureMap(std::size_t dim, PointMeasureFn fn) : dim_(dim), fn_(std::move(fn)) {}
  void apply(std::span<const double> xs, const EmpiricalMeasure& mu, std::span<double> out) const override {
    for (std::size_t i = 0; i * dim_ < xs.size(); ++i) fn_(xs.subspan(i * dim_, dim_), mu, out.subspan(i * dim_, dim_));
  }

 private:
  std::size_t dim_;
  PointMeasureFn fn_;
};

class PointwiseControlMap final : public ControlMap {
 public:
  PointwiseControlMap(std::size_t dim, PointControlFn fn) : dim_(dim), fn_(std::move(fn)) {}
  void apply(std::span<const double> xs, const EmpiricalMeasure& mu, std::span<const double> us,
             std::span<double> out) const override {
    for (std::size_t i = 0; i * dim_ < xs.size(); ++i)
      fn_(xs.subspan(i * dim_, dim_), mu, us.subspan(i * dim_, dim_), out.subspan(i * dim_, dim_));
  }

 private:
  std::size_t dim_;
  PointControlFn fn_;
};

class AffineMeasureMap final : public MeasureMap {
 public:
  explicit AffineMeasureMap(Affine a) : a_(a) {}
  void apply(std::span<const double> xs, const EmpiricalMeasure& mu, std::span<double> out) const override {
    const std::size_t d = mu.dim();
    const auto m = mu.mean();
    const std::size_t n = xs.size();
    if (d == 1) {
      const double shift = a_.cm * m[0] + a_.c0;
      const double cx = a_.cx;
      for (std::size_t i = 0; i < n; ++i) out[i] = cx * xs[i] + shift;
      return;
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = a_.cx * xs[i] + a_.cm * m[i % d] + a_.c0;
  }
  Affine coefficients() const { return a_; }

 private:
  Affine a_;
};

class AffineControlMap final : public ControlMap {
 public:
  explicit AffineControlMap(Affine a) : a_(a) {}
  void apply(std::span<const double> xs, const EmpiricalMeasure& mu, std::span<const double> us,
             std::span<double> out) const override {
    const std::size_t d = mu.dim();
    const auto m = mu.mean();
    const std::size_t n = xs.size();
    if (d == 1) {
      const double shift = a_.cm * m[0] + a_.c0;
      const double cx = a_.cx, cu = a_.cu;
      for (std::size_t i = 0; i < n; ++i) out[i] = cx * xs[i] + cu * us[i] + shift;
      return;
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = a_.cx * xs[i] + a_.cu * us[i] + a_.cm * m[i % d] + a_.c0;
  }
  Affine coefficients() const { return a_; }

 private:
  Affine a_;
};

}  // namespace

MeasureMapPtr make_measure_map(std::size_t dim, PointMeasureFn fn) {
  return std::make_shared<PointwiseMeasureMap>(dim, std::move(fn));
}
ControlMapPtr make_control_map(std::size_t dim, PointControlFn fn) {
  return std::make_shared<PointwiseControlMap>(dim, std::move(fn));
}
MeasureMapPtr affine_measure_map(Affine a) { return std::make_shared<AffineMeasureMap>(a); }
ControlMapPtr affine_control_map(Affine a) { return std::make_shared<AffineControlMap>(a); }

std::optional<Affine> as_affine(const MeasureMap& m) {
  if (auto* p = dynamic_cast<const AffineMeasureMap*>(&m)) return p->coefficients();
  return std::nullopt;
}
std::optional<Affine> as_affine(const ControlMap& m) {
  if (auto* p = dynamic_cast<const AffineControlMap*>(&m)) return p->coefficients();
  return std::nullopt;
}

std::string to_string(RegimeKind k) {
  switch (k) {
    case RegimeKind::None: return "none";
    case RegimeKind::JointMonotone: return "joint_monotone";
    case RegimeKind::WeakStrongInX: return "weak_strong_x";
    case RegimeKind::StrongInX: return "strong_x";
    case RegimeKind::WeakStrongInW: return "weak_strong_w";
    case RegimeKind::StrongInW: return "strong_w";
  }
  return "none";
}

RegimeKind regime_from_string(const std::string& s) {
  for (auto k : {RegimeKind::None, RegimeKind::JointMonotone, RegimeKind::WeakStrongInX, RegimeKind::StrongInX,
                 RegimeKind::WeakStrongInW, RegimeKind::StrongInW})
    if (to_string(k) == s) return k;
  throw ValidationError("unknown regime '" + s + "'");
}

// ---- family registry ------------------------------------------------------------

namespace {

double param(const Params& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

void check_keys(const std::string& family, const Params& p, std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : p) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw ValidationError("family '" + family + "' has no parameter '" + k + "'");
    if (!std::isfinite(v)) throw ValidationError("parameter '" + k + "' is not finite");
  }
}

// F = u and G = q x + qb mean: joint product |dU|^2 + q|dX|^2 + qb |E dX|^2.
Regime control_regime(double q, double qb) {
  const double alpha = std::min(q, q + qb);
  if (alpha > 0.0) return {RegimeKind::WeakStrongInX, alpha, 0.0, std::nullopt};
  if (alpha == 0.0) return {RegimeKind::JointMonotone, 0.0, 0.0, std::nullopt};
  return {};
}

std::optional<double> linear_a0(double p, double pb) {
  if (p > 0.0 && p + pb > 0.0) return std::min(1.0 / p, 1.0 / (p + pb));
  return std::nullopt;
}

CoefficientSet make_lq(std::size_t dim, const Params& prm) {
  check_keys("lq", prm, {"q", "q_bar", "p", "p_bar"});
  const double q = param(prm, "q", 0.0), qb = param(prm, "q_bar", 0.0);
  const double p = param(prm, "p", 0.0), pb = param(prm, "p_bar", 0.0);
  CoefficientSet cs;
  cs.family = "lq";
  cs.dim = dim;
  cs.F = affine_control_map({0.0, 0.0, 1.0, 0.0});
  cs.G = affine_control_map({q, qb, 0.0, 0.0});
  cs.W0 = affine_measure_map({p, pb, 0.0, 0.0});
  cs.growth_constant = std::max({1.0, 1.0 + std::fabs(q) + std::fabs(qb), 1.0 + std::fabs(p) + std::fabs(pb)});
  cs.regime = control_regime(q, qb);
  cs.regime.a0 = linear_a0(p, pb);
  cs.params = prm;
  return cs;
}

CoefficientSet make_affine(std::size_t dim, const Params& prm) {
  check_keys("affine", prm, {"fx", "fm", "fu", "f0", "gx", "gm", "gu", "g0", "wx", "wm", "w0"});
  auto g = [&](const char* k) { return param(prm, k, 0.0); };
  const Affine f{g("fx"), g("fm"), g("fu"), g("f0")};
  const Affine gg{g("gx"), g("gm"), g("gu"), g("g0")};
  const Affine w{g("wx"), g("wm"), 0.0, g("w0")};
  CoefficientSet cs;
  cs.family = "affine";
  cs.dim = dim;
  cs.F = affine_control_map(f);
  cs.G = affine_control_map(gg);
  cs.W0 = affine_measure_map(w);
  auto bound = [](const Affine& a) {
    return std::max({std::fabs(a.cx) + std::fabs(a.cm), std::fabs(a.cu), std::fabs(a.c0)});
  };
  cs.growth_constant = std::max({1.0, bound(f), bound(gg), bound(w)});
  if (f.cx == 0.0 && f.cm == 0.0 && f.cu == 1.0 && f.c0 == 0.0 && gg.cu == 0.0 && gg.c0 == 0.0)
    cs.regime = control_regime(gg.cx, gg.cm);
  if (w.c0 == 0.0) cs.regime.a0 = linear_a0(w.cx, w.cm);
  cs.params = prm;
  return cs;
}

CoefficientSet make_holder(std::size_t dim, const Params& prm) {
  check_keys("holder", prm, {"q", "q_bar", "p", "p_bar", "c", "gamma"});
  const double q = param(prm, "q", 1.0), qb = param(prm, "q_bar", 0.0);
  const double p = param(prm, "p", 0.0), pb = param(prm, "p_bar", 0.0);
  const double c = param(prm, "c", 1.0), gamma = param(prm, "gamma", 0.5);
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("holder: gamma must lie in (0, 1]");
  if (c < 0.0) throw ValidationError("holder: c must be nonnegative");
  CoefficientSet cs;
  cs.family = "holder";
  cs.dim = dim;
  cs.F = affine_control_map({0.0, 0.0, 1.0, 0.0});
  cs.G = affine_control_map({q, qb, 0.0, 0.0});
  cs.W0 = make_measure_map(dim, [p, pb, c, gamma](std::span<const double> x, const EmpiricalMeasure& mu,
                                                  std::span<double> out) {
    const auto m = mu.mean();
    for (std::size_t k = 0; k < x.size(); ++k)
      out[k] = p * x[k] + c * std::copysign(std::pow(std::fabs(x[k]), gamma), x[k]) + pb * m[k];
  });
  cs.growth_constant = std::max(
      {1.0, 1.0 + std::fabs(q) + std::fabs(qb), std::fabs(c) + std::fabs(p) + std::fabs(pb)});
  // joint product >= |dU|^2 - max(0, -min(q, q+qb)) |dX|^2
  cs.regime = {RegimeKind::WeakStrongInW, 1.0, std::max(0.0, -std::min(q, q + qb)), std::nullopt};
  cs.gamma = gamma;
  cs.params = prm;
  return cs;
}

struct Registries {
  std::mutex mutex;
  std::map<std::string, FamilyCtor> families{
      {"lq", make_lq},
      {"affine", make_affine},
      {"holder", make_holder},
      {"zero", [](std::size_t dim, const Params& p) {
         check_keys("zero", p, {});
         auto cs = make_affine(dim, p);
         cs.family = "zero";
         cs.regime = {RegimeKind::JointMonotone, 0.0, 0.0, std::nullopt};
         return cs;
       }}};
  std::map<std::string, BaseMapCtor> bases{
      {"linear",
       [](std::size_t, const Params& p) {
         check_keys("linear", p, {"k", "k_mean", "c"});
         const double k = param(p, "k", 1.0), km = param(p, "k_mean", 0.0), c = param(p, "c", 0.0);
         return BaseMap{affine_measure_map({k, km, 0.0, c}),
                        std::max({std::fabs(k) + std::fabs(km), std::fabs(c)})};
       }},
      {"cubic",
       [](std::size_t dim, const Params& p) {
         check_keys("cubic", p, {});
         return BaseMap{make_measure_map(dim, [](std::span<const double> x, const EmpiricalMeasure&,
                                                 std::span<double> out) {
                          for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k] * x[k] * x[k];
                        }),
                        std::nullopt};
       }},
      {"cubic_clipped", [](std::size_t dim, const Params& p) {
         check_keys("cubic_clipped", p, {"radius"});
         const double r = param(p, "radius", 10.0);
         if (!(r > 0.0)) throw ValidationError("cubic_clipped: radius must be positive");
         return BaseMap{make_measure_map(dim, [r](std::span<const double> x, const EmpiricalMeasure&,
                                                  std::span<double> out) {
                          for (std::size_t k = 0; k < x.size(); ++k) out[k] = clipped_cubic(x[k], r);
                        }),
                        3.0 * r * r};
       }}};
};

Registries& registries() {
  static Registries r;
  return r;
}

}  // namespace

double clipped_cubic(double x, double radius) {
  const double a = std::fabs(x);
  if (a <= radius) return x * x * x;
  // C^1 linear continuation: slope 3R^2 through (R, R^3)
  return std::copysign(3.0 * radius * radius * a - 2.0 * radius * radius * radius, x);
}

void register_family(const std::string& name, FamilyCtor ctor) {
  auto& r = registries();
  std::lock_guard lock(r.mutex);
  r.families[name] = std::move(ctor);
}

std::vector<std::string> family_names() {
  auto& r = registries();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> out;
  for (const auto& [k, v] : r.families) out.push_back(k);
  return out;
}

bool has_family(const std::string& name) {
  auto& r = registries();
  std::lock_guard lock(r.mutex);
  return r.families.count(name) != 0;
}

CoefficientSet make_coefficients(const std::string& family, std::size_t dim, const Params& params) {
  if (dim == 0) throw ValidationError("coefficient dimension must be positive");
  FamilyCtor ctor;
  {
    auto& r = registries();
    std::lock_guard lock(r.mutex);
    auto it = r.families.find(family);
    if (it == r.families.end()) throw UnsupportedError("unknown coefficient family '" + family + "'");
    ctor = it->second;
  }
  return ctor(dim, params);
}

void register_base_map(const std::string& name, BaseMapCtor ctor) {
  auto& r = registries();
  std::lock_guard lock(r.mutex);
  r.bases[name] = std::move(ctor);
}

std::vector<std::string> base_map_names() {
  auto& r = registries();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> out;
  for (const auto& [k, v] : r.bases) out.push_back(k);
  return out;
}

BaseMap make_base_map(const std::string& name, std::size_t dim, const Params& params) {
  BaseMapCtor ctor;
  {
    auto& r = registries();
    std::lock_guard lock(r.mutex);
    auto it = r.bases.find(name);
    if (it == r.bases.end()) throw UnsupportedError("unknown base map '" + name + "'");
    ctor = it->second;
  }
  return ctor(dim, params);
}

// ---- sampling -------------------------------------------------------------------

std::vector<double> sample_points(const SamplerSpec& spec, RngStream& rng, std::size_t n) {
  const std::size_t d = spec.dim;
  std::vector<double> pts(n * d);
  if (spec.kind == SamplerSpec::Kind::UniformBox) {
    for (auto& v : pts) v = spec.lo + (spec.hi - spec.lo) * rng.uniform();
    return pts;
  }
  if (spec.components.empty()) throw ValidationError("sampler needs at least one mixture component");
  double total = 0.0;
  for (const auto& c : spec.components) total += c.weight;
  const auto df = static_cast<int>(std::lround(spec.heavy_tail_df));
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform() * total;
    std::size_t k = 0;
    while (k + 1 < spec.components.size() && u >= spec.components[k].weight) u -= spec.components[k++].weight;
    const auto& comp = spec.components[k];
    double scale = comp.std;
    if (df > 0 && rng.uniform() < spec.heavy_tail_prob) {
      double chi2 = 0.0;
      for (int j = 0; j < df; ++j) {
        const double z = rng.normal();
        chi2 += z * z;
      }
      scale *= std::sqrt(static_cast<double>(df) / std::max(chi2, 1e-300));
    }
    for (std::size_t c = 0; c < d; ++c)
      pts[i * d + c] = (comp.mean.empty() ? 0.0 : comp.mean[c % comp.mean.size()]) + scale * rng.normal();
  }
  return pts;
}

EmpiricalMeasure sample_cloud(const SamplerSpec& spec, RngStream& rng) {
  return EmpiricalMeasure::uniform(spec.dim, sample_points(spec, rng, spec.atoms));
}

}  // namespace mfg
