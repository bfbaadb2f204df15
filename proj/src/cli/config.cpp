#include <cmath>
#include <set>
#include <sstream>

#include "mfg/cli.hpp"
#include "mfg/io.hpp"
#include "toml.hpp"

namespace mfg::cli {

using nlohmann::json;

namespace {

json node_to_json(const toml::node& n) {
  if (auto t = n.as_table()) {
    json o = json::object();
    for (const auto& [k, v] : *t) o[std::string(k.str())] = node_to_json(v);
    return o;
  }
  if (auto a = n.as_array()) {
    json o = json::array();
    for (const auto& v : *a) o.push_back(node_to_json(v));
    return o;
  }
  if (auto v = n.as_integer()) return v->get();
  if (auto v = n.as_floating_point()) return v->get();
  if (auto v = n.as_boolean()) return v->get();
  if (auto v = n.as_string()) return v->get();
  std::ostringstream s;
  n.visit([&](const auto& x) { s << x; });
  return s.str();
}

/// Typed reads from one config table; unknown keys are rejected in finish().
class Section {
 public:
  Section(const json& j, std::string name) : name_(std::move(name)) {
    if (j.is_null()) return;
    if (!j.is_object()) fail("", "must be a table");
    j_ = &j;
  }

  bool has(const std::string& key) const { return j_ && j_->contains(key); }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    if (!j_ || !j_->contains(key)) return nullptr;
    return &j_->at(key);
  }

  double num(const std::string& key, double def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_number()) fail(key, "must be a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite");
    return x;
  }

  std::optional<double> opt_num(const std::string& key) {
    if (!has(key)) {
      seen_.insert(key);
      return std::nullopt;
    }
    return num(key, 0.0);
  }

  std::uint64_t uint(const std::string& key, std::uint64_t def) {
    const json* v = raw(key);
    if (!v) return def;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    if (v->is_number_integer()) {
      if (v->get<std::int64_t>() < 0) fail(key, "must be nonnegative");
      return static_cast<std::uint64_t>(v->get<std::int64_t>());
    }
    fail(key, "must be a nonnegative integer");
  }

  std::string str(const std::string& key, const std::string& def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_string()) fail(key, "must be a string");
    return v->get<std::string>();
  }

  std::vector<double> nums(const std::string& key, std::vector<double> def, bool allow_scalar = false) {
    const json* v = raw(key);
    if (!v) return def;
    if (allow_scalar && v->is_number()) return {v->get<double>()};
    if (!v->is_array()) fail(key, "must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : *v) {
      if (!e.is_number()) fail(key, "must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::size_t> sizes(const std::string& key, std::vector<std::size_t> def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_array()) fail(key, "must be an array of integers");
    std::vector<std::size_t> out;
    for (const auto& e : *v) {
      if (!e.is_number_integer() || e.get<std::int64_t>() < 0) fail(key, "must be an array of nonnegative integers");
      out.push_back(e.get<std::size_t>());
    }
    return out;
  }

  Params params(const std::string& key) {
    const json* v = raw(key);
    Params p;
    if (!v) return p;
    if (!v->is_object()) fail(key, "must be a table of numbers");
    for (const auto& [k, e] : v->items()) {
      if (!e.is_number()) fail(key + "." + k, "must be a number");
      p[k] = e.get<double>();
    }
    return p;
  }

  void finish() const {
    if (!j_) return;
    for (const auto& [k, v] : j_->items())
      if (!seen_.count(k)) fail(k, "is not a recognized key");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    std::string where = name_;
    if (!key.empty()) where += where.empty() ? key : "." + key;
    throw ValidationError("config " + (where.empty() ? std::string("root") : where) + " " + msg);
  }

 private:
  const json* j_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;
};

const json& sub(const json& root, const char* key) {
  static const json null;
  return root.contains(key) ? root.at(key) : null;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError("config " + msg);
}

SamplerSpec parse_sampler(const json& j, std::size_t dim, json& resolved) {
  Section s(j, "sampler");
  SamplerSpec sp;
  sp.dim = dim;
  const std::string kind = s.str("kind", "gaussian_mixture");
  if (kind == "gaussian_mixture") sp.kind = SamplerSpec::Kind::GaussianMixture;
  else if (kind == "uniform_box") sp.kind = SamplerSpec::Kind::UniformBox;
  else s.fail("kind", "must be gaussian_mixture or uniform_box");
  sp.atoms = s.uint("atoms", sp.atoms);
  require(sp.atoms >= 1, "sampler.atoms must be >= 1");
  sp.heavy_tail_df = s.num("heavy_tail_df", 0.0);
  sp.heavy_tail_prob = s.num("heavy_tail_prob", 0.0);
  require(sp.heavy_tail_prob >= 0.0 && sp.heavy_tail_prob <= 1.0, "sampler.heavy_tail_prob must lie in [0, 1]");
  require(sp.heavy_tail_df >= 0.0, "sampler.heavy_tail_df must be nonnegative");
  sp.lo = s.num("lo", sp.lo);
  sp.hi = s.num("hi", sp.hi);
  require(sp.hi > sp.lo, "sampler.hi must exceed sampler.lo");
  sp.u_scale = s.num("u_scale", sp.u_scale);
  json comps = json::array();
  if (const json* c = s.raw("components")) {
    if (!c->is_array() || c->empty()) s.fail("components", "must be a non-empty array of tables");
    sp.components.clear();
    for (const auto& e : *c) {
      Section cs(e, "sampler.components");
      MixtureComponent m;
      m.weight = cs.num("weight", 1.0);
      m.mean = cs.nums("mean", {}, true);
      m.std = cs.num("std", 1.0);
      cs.finish();
      require(m.weight > 0.0, "sampler.components.weight must be positive");
      require(m.std >= 0.0, "sampler.components.std must be nonnegative");
      if (m.mean.size() == 1 && dim > 1) m.mean.assign(dim, m.mean[0]);
      require(m.mean.empty() || m.mean.size() == dim, "sampler.components.mean must have dim entries");
      sp.components.push_back(m);
    }
  }
  for (const auto& m : sp.components) comps.push_back({{"weight", m.weight}, {"mean", m.mean}, {"std", m.std}});
  s.finish();
  resolved = {{"kind", kind},           {"atoms", sp.atoms}, {"heavy_tail_df", sp.heavy_tail_df},
              {"heavy_tail_prob", sp.heavy_tail_prob}, {"lo", sp.lo}, {"hi", sp.hi},
              {"u_scale", sp.u_scale},  {"components", comps}};
  return sp;
}

}  // namespace

json toml_to_json(std::string_view text) {
  try {
    return node_to_json(toml::parse(text));
  } catch (const toml::parse_error& e) {
    std::ostringstream s;
    s << "config is not valid TOML: " << e.description() << " at line " << e.source().begin.line;
    throw ValidationError(s.str());
  }
}

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Config parse_config(const json& raw, std::optional<std::uint64_t> seed_override) {
  if (!raw.is_object()) throw ValidationError("config root must be a table");
  Config c;
  Section root(raw, "");
  c.seed = root.uint("seed", 0);
  if (seed_override) c.seed = *seed_override;
  root.uint("threads", 0);  // runtime only, kept out of the hash
  json& R = c.resolved;
  R["seed"] = c.seed;

  {
    Section s(sub(raw, "coefficients"), "coefficients");
    root.raw("coefficients");
    c.family = s.str("family", c.family);
    c.dim = s.uint("dim", c.dim);
    require(c.dim >= 1, "coefficients.dim must be >= 1");
    c.params = s.params("params");
    if (s.has("regime")) c.regime = s.str("regime", "");
    else s.raw("regime");
    c.alpha = s.opt_num("alpha");
    c.L = s.opt_num("L");
    c.gamma = s.opt_num("gamma");
    c.growth_constant = s.opt_num("growth_constant");
    s.finish();
    if (c.regime) regime_from_string(*c.regime);
    if (c.gamma) require(*c.gamma > 0.0 && *c.gamma <= 1.0, "coefficients.gamma must lie in (0, 1]");
    json co = {{"family", c.family}, {"dim", c.dim}, {"params", c.params}};
    if (c.regime) co["regime"] = *c.regime;
    if (c.alpha) co["alpha"] = *c.alpha;
    if (c.L) co["L"] = *c.L;
    if (c.gamma) co["gamma"] = *c.gamma;
    if (c.growth_constant) co["growth_constant"] = *c.growth_constant;
    R["coefficients"] = co;
  }
  {
    Section s(sub(raw, "scenario"), "scenario");
    root.raw("scenario");
    c.T = s.num("T", c.T);
    c.dt = s.num("dt", c.dt);
    c.N = s.uint("N", c.N);
    c.M = s.uint("M", c.M);
    c.sigma_x = s.num("sigma_x", c.sigma_x);
    c.beta = s.num("beta", c.beta);
    s.finish();
    require(c.T > 0.0, "scenario.T must be positive");
    require(c.dt > 0.0, "scenario.dt must be positive");
    step_count(c.T, c.dt);
    require(c.N >= 1, "scenario.N must be >= 1");
    require(c.M >= 1, "scenario.M must be >= 1");
    require(c.sigma_x >= 0.0, "scenario.sigma_x must be nonnegative");
    require(c.beta >= 0.0, "scenario.beta must be nonnegative");
    R["scenario"] = {{"T", c.T}, {"dt", c.dt}, {"N", c.N}, {"M", c.M}, {"sigma_x", c.sigma_x}, {"beta", c.beta}};
  }
  {
    Section s(sub(raw, "theta"), "theta");
    root.raw("theta");
    c.theta.drift = s.str("drift", c.theta.drift);
    c.theta.diffusion = s.str("diffusion", c.theta.diffusion);
    c.theta.kappa = s.num("kappa", c.theta.kappa);
    c.theta.scale = s.num("scale", c.theta.scale);
    c.theta0 = s.nums("theta0", std::vector<double>(c.dim, 0.0), true);
    s.finish();
    if (c.theta0.size() == 1 && c.dim > 1) c.theta0.assign(c.dim, c.theta0[0]);
    require(c.theta0.size() == c.dim, "theta.theta0 must have dim entries");
    const auto dn = theta_drift_names(), sn = theta_diffusion_names();
    require(std::find(dn.begin(), dn.end(), c.theta.drift) != dn.end(), "theta.drift '" + c.theta.drift + "' is unknown");
    require(std::find(sn.begin(), sn.end(), c.theta.diffusion) != sn.end(),
            "theta.diffusion '" + c.theta.diffusion + "' is unknown");
    R["theta"] = {{"drift", c.theta.drift}, {"diffusion", c.theta.diffusion}, {"kappa", c.theta.kappa},
                  {"scale", c.theta.scale}, {"theta0", c.theta0}};
  }
  {
    const json* im = root.raw("initial_measures");
    json arr = json::array();
    if (im) {
      if (!im->is_array() || im->empty()) throw ValidationError("config initial_measures must be a non-empty array of tables");
      for (const auto& e : *im) {
        Section s(e, "initial_measures");
        InitialMeasureSpec m;
        m.kind = s.str("kind", m.kind);
        m.mean = s.nums("mean", {}, true);
        m.std = s.num("std", m.std);
        m.lo = s.num("lo", m.lo);
        m.hi = s.num("hi", m.hi);
        m.atoms = s.uint("atoms", c.N);
        m.path = s.str("path", "");
        s.finish();
        c.initial_measures.push_back(m);
      }
    } else {
      InitialMeasureSpec m;
      m.atoms = c.N;
      c.initial_measures.push_back(m);
    }
    for (auto& m : c.initial_measures) {
      if (m.mean.empty()) m.mean.assign(c.dim, 0.0);
      if (m.mean.size() == 1 && c.dim > 1) m.mean.assign(c.dim, m.mean[0]);
      require(m.mean.size() == c.dim, "initial_measures.mean must have dim entries");
      require(m.kind == "gaussian" || m.kind == "dirac" || m.kind == "uniform" || m.kind == "csv",
              "initial_measures.kind must be gaussian, dirac, uniform or csv");
      require(m.std >= 0.0, "initial_measures.std must be nonnegative");
      require(m.hi > m.lo, "initial_measures.hi must exceed lo");
      require(m.atoms >= 1, "initial_measures.atoms must be >= 1");
      require(m.kind != "csv" || !m.path.empty(), "initial_measures.path is required for kind = csv");
      json o = {{"kind", m.kind}};
      if (m.kind == "gaussian") o.update({{"mean", m.mean}, {"std", m.std}, {"atoms", m.atoms}});
      if (m.kind == "dirac") o["mean"] = m.mean;
      if (m.kind == "uniform") o.update({{"lo", m.lo}, {"hi", m.hi}, {"atoms", m.atoms}});
      if (m.kind == "csv") o["path"] = m.path;
      arr.push_back(o);
    }
    R["initial_measures"] = arr;
  }
  {
    Section s(sub(raw, "grid"), "grid");
    root.raw("grid");
    c.grid.lo = s.num("lo", c.grid.lo);
    c.grid.hi = s.num("hi", c.grid.hi);
    c.grid.n = s.uint("n", c.grid.n);
    c.grid.shifts = s.nums("shifts", c.grid.shifts);
    s.finish();
    require(c.grid.n >= 2, "grid.n must be >= 2");
    require(c.grid.hi > c.grid.lo, "grid.hi must exceed grid.lo");
    require(!c.grid.shifts.empty(), "grid.shifts must be non-empty");
    for (std::size_t i = 1; i < c.grid.shifts.size(); ++i)
      require(c.grid.shifts[i] > c.grid.shifts[i - 1], "grid.shifts must be strictly increasing");
    R["grid"] = {{"lo", c.grid.lo}, {"hi", c.grid.hi}, {"n", c.grid.n}, {"shifts", c.grid.shifts}};
  }
  {
    Section s(sub(raw, "picard"), "picard");
    root.raw("picard");
    c.picard.tol = s.num("tol", c.picard.tol);
    c.picard.max_iter = static_cast<int>(s.uint("max_iter", static_cast<std::uint64_t>(c.picard.max_iter)));
    s.finish();
    require(c.picard.tol > 0.0, "picard.tol must be positive");
    require(c.picard.max_iter >= 1, "picard.max_iter must be >= 1");
    R["picard"] = {{"tol", c.picard.tol}, {"max_iter", c.picard.max_iter}};
  }
  root.raw("sampler");
  c.sampler = parse_sampler(sub(raw, "sampler"), c.dim, R["sampler"]);
  {
    Section s(sub(raw, "estimates"), "estimates");
    root.raw("estimates");
    auto& e = c.estimates;
    e.sizes = s.nums("sizes", e.sizes);
    e.measure_deltas = s.nums("measure_deltas", e.measure_deltas);
    e.slack = s.num("slack", e.slack);
    e.field = s.str("field", e.field);
    s.finish();
    require(e.sizes.size() >= 2, "estimates.sizes needs at least two entries");
    for (double v : e.sizes) require(v > 0.0, "estimates.sizes must be positive");
    for (double v : e.measure_deltas) require(v >= 0.0, "estimates.measure_deltas must be nonnegative");
    require(e.slack >= 0.0, "estimates.slack must be nonnegative");
    R["estimates"] = {{"sizes", e.sizes}, {"measure_deltas", e.measure_deltas}, {"slack", e.slack}, {"field", e.field}};
  }
  {
    Section s(sub(raw, "propagation"), "propagation");
    root.raw("propagation");
    c.propagation.n_pairs = s.uint("n_pairs", c.propagation.n_pairs);
    c.propagation.time_stride = s.uint("time_stride", c.propagation.time_stride);
    s.finish();
    require(c.propagation.n_pairs >= 1, "propagation.n_pairs must be >= 1");
    require(c.propagation.time_stride >= 1, "propagation.time_stride must be >= 1");
    R["propagation"] = {{"n_pairs", c.propagation.n_pairs}, {"time_stride", c.propagation.time_stride}};
  }
  {
    Section s(sub(raw, "regularize"), "regularize");
    root.raw("regularize");
    auto& r = c.regularize;
    r.base = s.str("base", r.base);
    r.params = s.params("params");
    r.epsilons = s.nums("epsilons", r.epsilons);
    r.growth_constant = s.opt_num("growth_constant");
    r.shift_constant = s.num("shift_constant", r.shift_constant);
    r.n_clouds = s.uint("n_clouds", r.n_clouds);
    r.n_pairs = s.uint("n_pairs", r.n_pairs);
    r.growth_samples = s.uint("growth_samples", r.growth_samples);
    s.finish();
    require(!r.epsilons.empty(), "regularize.epsilons must be non-empty");
    for (std::size_t i = 0; i < r.epsilons.size(); ++i) {
      require(r.epsilons[i] > 0.0, "regularize.epsilons must be positive");
      if (i) require(r.epsilons[i] < r.epsilons[i - 1], "regularize.epsilons must be strictly decreasing");
    }
    if (r.growth_constant) require(*r.growth_constant > 0.0, "regularize.growth_constant must be positive");
    require(r.n_clouds >= 1 && r.n_pairs >= 1 && r.growth_samples >= 1, "regularize sample counts must be >= 1");
    json o = {{"base", r.base},         {"params", r.params},     {"epsilons", r.epsilons},
              {"shift_constant", r.shift_constant}, {"n_clouds", r.n_clouds}, {"n_pairs", r.n_pairs},
              {"growth_samples", r.growth_samples}};
    if (r.growth_constant) o["growth_constant"] = *r.growth_constant;
    R["regularize"] = o;
  }
  {
    Section s(sub(raw, "oracle_compare"), "oracle_compare");
    root.raw("oracle_compare");
    auto& o = c.oracle_compare;
    o.dts = s.nums("dts", o.dts);
    o.Ns = s.sizes("Ns", o.Ns);
    o.Ms = s.sizes("Ms", o.Ms);
    o.oracle_dt = s.num("oracle_dt", o.oracle_dt);
    s.finish();
    require(!o.dts.empty() && !o.Ns.empty() && !o.Ms.empty(), "oracle_compare grids must be non-empty");
    for (double dt : o.dts) {
      require(dt > 0.0, "oracle_compare.dts must be positive");
      step_count(c.T, dt);
    }
    for (auto n : o.Ns) require(n >= 2, "oracle_compare.Ns must be >= 2");
    for (auto m : o.Ms) require(m >= 1, "oracle_compare.Ms must be >= 1");
    require(o.oracle_dt > 0.0, "oracle_compare.oracle_dt must be positive");
    R["oracle_compare"] = {{"dts", o.dts}, {"Ns", o.Ns}, {"Ms", o.Ms}, {"oracle_dt", o.oracle_dt}};
  }
  {
    Section s(sub(raw, "probe"), "probe");
    root.raw("probe");
    c.probe.n_pairs = s.uint("n_pairs", c.probe.n_pairs);
    s.finish();
    require(c.probe.n_pairs >= 1, "probe.n_pairs must be >= 1");
    R["probe"] = {{"n_pairs", c.probe.n_pairs}};
  }
  root.finish();
  c.hash = fnv1a64_hex(R.dump());
  return c;
}

Config load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
  if (!std::filesystem::exists(path)) throw ValidationError("config file '" + path.string() + "' does not exist");
  const std::string text = io::read_text(path);
  json raw;
  if (path.extension() == ".json") {
    try {
      raw = json::parse(text);
    } catch (const json::exception& e) {
      throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
  } else {
    raw = toml_to_json(text);
  }
  Config c = parse_config(raw, seed_override);
  // csv measures resolve against the config directory
  for (auto& m : c.initial_measures)
    if (m.kind == "csv" && std::filesystem::path(m.path).is_relative()) m.path = (path.parent_path() / m.path).string();
  return c;
}

CoefficientSet build_coefficients(const Config& cfg) {
  CoefficientSet cs = make_coefficients(cfg.family, cfg.dim, cfg.params);
  if (cfg.regime) cs.regime.kind = regime_from_string(*cfg.regime);
  if (cfg.alpha) cs.regime.alpha = *cfg.alpha;
  if (cfg.L) cs.regime.L = *cfg.L;
  if (cfg.gamma) cs.gamma = *cfg.gamma;
  if (cfg.growth_constant) cs.growth_constant = *cfg.growth_constant;
  return cs;
}

std::vector<EmpiricalMeasure> build_initial_measures(const Config& cfg) {
  std::vector<EmpiricalMeasure> out;
  const std::size_t d = cfg.dim;
  for (std::size_t r = 0; r < cfg.initial_measures.size(); ++r) {
    const auto& m = cfg.initial_measures[r];
    RngStream rng(CounterRng(mix64(cfg.seed + r), streams::kReference));
    if (m.kind == "csv") {
      auto mu = io::read_measure_csv(m.path);
      if (mu.dim() != d) throw DimensionError("initial measure '" + m.path + "' has the wrong dimension");
      out.push_back(std::move(mu));
      continue;
    }
    if (m.kind == "dirac") {
      out.push_back(EmpiricalMeasure::dirac(m.mean));
      continue;
    }
    std::vector<double> pts(m.atoms * d);
    for (std::size_t i = 0; i < m.atoms; ++i)
      for (std::size_t c = 0; c < d; ++c)
        pts[i * d + c] = m.kind == "gaussian" ? m.mean[c] + m.std * rng.normal() : m.lo + (m.hi - m.lo) * rng.uniform();
    out.push_back(EmpiricalMeasure::uniform(d, std::move(pts)));
  }
  return out;
}

SolverScenario build_scenario(const Config& cfg) {
  SolverScenario sc;
  sc.T = cfg.T;
  sc.dt = cfg.dt;
  sc.N = cfg.N;
  sc.M = cfg.M;
  sc.sigma_x = cfg.sigma_x;
  sc.references = build_initial_measures(cfg);
  sc.grid = cfg.grid;
  sc.seed = cfg.seed;
  sc.config_hash = cfg.hash;
  return sc;
}

}  // namespace mfg::cli
