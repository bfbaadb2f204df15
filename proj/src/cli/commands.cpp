#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>

#include "mfg/cli.hpp"
#include "mfg/diagnostics.hpp"
#include "mfg/harness.hpp"
#include "mfg/io.hpp"
#include "mfg/oracle_lq.hpp"
#include "mfg/parallel.hpp"
#include "mfg/yosida.hpp"

namespace mfg::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kTool = "mfg";
constexpr const char* kVersion = "0.1.0";

void init_logging() {
  static bool done = false;
  if (done) return;
  done = true;
  auto logger = spdlog::stderr_color_mt("mfg");
  logger->set_pattern("[%l] %v");
  const char* env = std::getenv("MFG_LOG");
  logger->set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
  spdlog::set_default_logger(logger);
}

void write_json(const fs::path& path, const json& j) { io::write_text(path, j.dump(2) + "\n"); }

void write_manifest(const fs::path& out, const Config& cfg, const std::string& command,
                    const std::vector<std::string>& outputs, json extra = json::object()) {
  json m = {{"tool", kTool},
            {"version", kVersion},
            {"command", command},
            {"seed", cfg.seed},
            {"config_hash", cfg.hash},
            {"config", cfg.resolved},
            {"outputs", outputs}};
  for (auto& [k, v] : extra.items()) m[k] = v;
  write_json(out / "manifest.json", m);
}

json report_json(const MonotonicityReport& r) {
  return {{"min_quotient", r.min_quotient}, {"n_pairs", r.n_pairs}, {"worst_pair_index", r.worst_pair_index},
          {"worst_pair_seed", r.worst_pair_seed}, {"tolerance", r.tolerance}, {"passed", r.passed}};
}

void monotone_gate(const CoefficientSet& cs, const Config& cfg) {
  const auto w0 = probe_l2_monotone(*cs.W0, cfg.sampler, cfg.probe.n_pairs, cfg.seed);
  if (!w0.passed)
    throw GateError("terminal map W0 is not L2-monotone: min quotient " + io::fmt(w0.min_quotient) + " at pair " +
                    std::to_string(w0.worst_pair_index) + " (seed " + std::to_string(w0.worst_pair_seed) + ")");
  const auto fg = probe_joint_monotone(*cs.F, *cs.G, cfg.sampler, cfg.probe.n_pairs, cfg.seed);
  if (!fg.passed)
    throw GateError("(F, G) is not jointly L2-monotone: min quotient " + io::fmt(fg.min_quotient) + " at pair " +
                    std::to_string(fg.worst_pair_index) + " (seed " + std::to_string(fg.worst_pair_seed) + ")");
}

std::vector<double> grid_times(const DecouplingField& f, std::size_t stride) {
  std::vector<double> t;
  for (std::size_t k = 0; k <= f.steps(); k += stride) t.push_back(static_cast<double>(k) * f.dt());
  if (f.steps() % stride != 0) t.push_back(f.horizon());
  return t;
}

std::string residuals_csv(const FBSDEPaths& p, double dt) {
  const std::size_t d = p.flow.dim;
  std::string out = "k,t,component,residual_mean,residual_stderr\n";
  for (std::size_t k = 0; k < p.flow.steps(); ++k)
    for (std::size_t c = 0; c < d; ++c)
      out += std::to_string(k) + "," + io::fmt(static_cast<double>(k) * dt) + "," + std::to_string(c) + "," +
             io::fmt(p.residual_mean[k * d + c]) + "," + io::fmt(p.residual_stderr[k * d + c]) + "\n";
  return out;
}

std::string theta_csv(const ThetaPath& th) {
  std::string out = "t";
  for (std::size_t c = 0; c < th.dim; ++c) out += ",theta" + std::to_string(c + 1);
  out += "\n";
  for (std::size_t k = 0; k < th.times.size(); ++k) {
    out += io::fmt(th.times[k]);
    for (double v : th.at(k)) out += "," + io::fmt(v);
    out += "\n";
  }
  return out;
}

// ---- commands ---------------------------------------------------------------------

int cmd_solve(const Options& o, const Config& cfg) {
  const auto cs = build_coefficients(cfg);
  if (o.require_monotone) monotone_gate(cs, cfg);
  const auto sc = build_scenario(cfg);
  spdlog::info("solve: family {} d={} T={} dt={} N={} M={}", cfg.family, cfg.dim, cfg.T, cfg.dt, cfg.N, cfg.M);
  const auto field = picard_solve(cs, sc, cfg.picard);
  spdlog::info("picard: {} iterations, increment {:.3e}, converged={}", field.iteration_count, field.final_increment,
               field.converged);
  if (!field.converged) spdlog::warn("Picard iteration stopped at max_iter without reaching the tolerance");
  std::vector<std::string> outputs{"field/", "history.csv", "z_report.json"};
  field.save(o.out / "field");
  io::write_text(o.out / "history.csv", history_to_csv(field));
  const auto z = propagation_check(field, grid_times(field, cfg.propagation.time_stride), cfg.sampler,
                                   cfg.propagation.n_pairs, cfg.seed);
  io::write_text(o.out / "z_report.json", z_report_to_json(z));
  if (!z.passed)
    spdlog::warn("propagation check failed: min Z {:.3e} at t={} (pair seed {})", z.min_value, z.argmin_time,
                 z.argmin_pair_seed);
  if (field.converged) {
    const auto paths = build_fbsde_paths(field, cs, sc);
    io::write_text(o.out / "fbsde_residuals.csv", residuals_csv(paths, cfg.dt));
    outputs.push_back("fbsde_residuals.csv");
  }
  if (cfg.beta > 0.0) {
    const auto flow = simulate_conditional_common_noise(cs, field, sc.references[0], cfg.T, cfg.dt, cfg.N,
                                                        cfg.sigma_x, cfg.beta, cfg.seed);
    const auto stride = std::max<std::size_t>(1, flow.steps() / 10);
    write_flow(o.out / "common_noise_flow", flow, cfg.hash, stride);
    const auto th = simulate_theta(cfg.theta, cfg.theta0, cfg.T, cfg.dt, cfg.seed);
    io::write_text(o.out / "theta.csv", theta_csv(th));
    outputs.insert(outputs.end(), {"common_noise_flow/", "theta.csv"});
  }
  write_manifest(o.out, cfg, "solve", outputs,
                 {{"converged", field.converged},
                  {"iterations", field.iteration_count},
                  {"final_increment", field.final_increment},
                  {"propagation_passed", z.passed}});
  return kOk;
}

int cmd_verify_estimates(const Options& o, const Config& cfg) {
  fs::path dir = cfg.estimates.field.empty() ? o.out / "field" : fs::path(cfg.estimates.field);
  if (!fs::exists(dir / "manifest.json")) {
    if (!o.solve_first)
      throw MissingInputError("no solved field at '" + dir.string() + "'; run solve first or pass --solve-first");
    spdlog::info("no field at {}, solving first", dir.string());
    Options so = o;
    so.require_monotone = false;
    cmd_solve(so, cfg);
    dir = o.out / "field";
  }
  const auto cs = build_coefficients(cfg);
  const auto sc = build_scenario(cfg);
  const auto field = DecouplingField::load(dir, cs.W0);
  if (!field.config_hash.empty() && field.config_hash != cfg.hash)
    spdlog::warn("field was solved under config {} (current {})", field.config_hash, cfg.hash);
  StabilityOptions so;
  so.sizes = cfg.estimates.sizes;
  so.slack = cfg.estimates.slack;
  const auto state = stability_harness(field, cs, sc, so);
  io::write_text(o.out / "estimates_state.csv", estimate_to_csv(state));
  std::vector<std::string> outputs{"estimates_state.csv", "estimates.json"};
  auto summary = [](const EstimateReport& r) {
    return json{{"kind", r.kind},
                {"regime", to_string(r.regime)},
                {"gamma", r.gamma},
                {"fitted_exponent", r.fitted_exponent},
                {"predicted_exponent", r.predicted_exponent},
                {"fitted_x_exponent", r.fitted_x_exponent},
                {"predicted_x_exponent", r.predicted_x_exponent},
                {"ratio_spread", r.ratio_spread},
                {"slack", r.slack},
                {"passed", r.passed}};
  };
  json reports = json::array({summary(state)});
  bool ok = state.passed;
  if (!cfg.estimates.measure_deltas.empty()) {
    const auto meas = measure_stability_harness(field, cs, sc, cfg.estimates.measure_deltas, cfg.estimates.slack);
    io::write_text(o.out / "estimates_measure.csv", estimate_to_csv(meas));
    outputs.push_back("estimates_measure.csv");
    reports.push_back(summary(meas));
    ok = ok && meas.passed;
  }
  write_json(o.out / "estimates.json", {{"reports", reports}, {"passed", ok}});
  write_manifest(o.out, cfg, "verify-estimates", outputs, {{"passed", ok}});
  if (!ok) throw Error("estimate predictions not met within slack " + io::fmt(cfg.estimates.slack));
  return kOk;
}

int cmd_regularize(const Options& o, const Config& cfg) {
  const auto& rc = cfg.regularize;
  const auto base = make_base_map(rc.base, cfg.dim, rc.params);
  ResolventOptions ro;
  if (rc.growth_constant)
    for (double eps : rc.epsilons) regularize(base.map, eps, ro, rc.shift_constant, rc.growth_constant);
  SweepOptions so;
  so.compact = cfg.sampler;
  so.pairs = cfg.sampler;
  so.n_clouds = rc.n_clouds;
  so.n_pairs = rc.n_pairs;
  so.seed = cfg.seed;
  so.resolvent = ro;
  so.shift_constant = rc.shift_constant;
  const auto rows = convergence_sweep(base.map, rc.epsilons, so);
  io::write_text(o.out / "sweep.csv", sweep_to_csv(rows));
  const auto C = rc.growth_constant ? rc.growth_constant : base.growth_constant;
  const std::size_t growth_clouds = (rc.growth_samples + cfg.sampler.atoms - 1) / cfg.sampler.atoms;
  json cert = json::array();
  bool monotone_error = true, all_ok = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (i && !(r.sup_error < rows[i - 1].sup_error)) monotone_error = false;
    json row = {{"epsilon", r.epsilon},
                {"lipschitz_quotient", r.lipschitz_quotient},
                {"lipschitz_bound", 1.0 / r.epsilon},
                {"lipschitz_ok", r.lipschitz_quotient <= 1.0 / r.epsilon + 1e-6},
                {"sup_error", r.sup_error}};
    all_ok = all_ok && row["lipschitz_ok"].get<bool>();
    if (C && *C * r.epsilon < 0.5) {
      const auto reg = regularize(base.map, r.epsilon, ro, rc.shift_constant);
      const double g = growth_ratio(reg, cfg.sampler, growth_clouds, cfg.seed);
      const double bound = regularized_growth_bound(*C, r.epsilon);
      row.update({{"growth_ratio", g}, {"growth_bound", bound}, {"growth_ok", g <= bound}, {"growth_samples", growth_clouds * cfg.sampler.atoms}});
      all_ok = all_ok && g <= bound;
    }
    cert.push_back(row);
  }
  json out = {{"base", rc.base}, {"rows", cert}, {"sup_error_decreasing", monotone_error},
              {"certified", all_ok && monotone_error}};
  if (C) out["growth_constant"] = *C;
  write_json(o.out / "certification.json", out);
  write_manifest(o.out, cfg, "regularize", {"sweep.csv", "certification.json"});
  return kOk;
}

int cmd_oracle_compare(const Options& o, const Config& cfg) {
  const auto cs = build_coefficients(cfg);
  const auto params = lq_params_from(cs, cfg.T);
  const auto path = riccati_solve(params, cfg.oracle_compare.oracle_dt);
  const auto oracle = oracle_field(path);
  io::write_text(o.out / "riccati.csv", riccati_to_csv(path));
  std::string table = "dt,N,M,sup_error,iterations,converged,max_stderr\n";
  for (double dt : cfg.oracle_compare.dts)
    for (std::size_t N : cfg.oracle_compare.Ns)
      for (std::size_t M : cfg.oracle_compare.Ms) {
        auto sc = build_scenario(cfg);
        sc.dt = dt;
        sc.N = N;
        sc.M = M;
        const auto W = picard_solve(cs, sc, cfg.picard);
        const auto nodes = W.all_node_points();
        std::vector<double> ref(nodes.size());
        double err = 0.0;
        for (std::size_t r = 0; r < W.n_references(); ++r)
          for (std::size_t k = 0; k <= W.steps(); ++k)
            for (std::size_t l = 0; l < W.n_shift_nodes(); ++l) {
              oracle->evaluate(static_cast<double>(k) * dt, nodes, W.node_measure(r, l), ref);
              for (std::size_t j = 0; j < nodes.size(); ++j)
                err = std::max(err, std::fabs(ref[j] - W.values()[W.index(r, k, l, j, 0)]));
            }
        spdlog::info("oracle-compare dt={} N={} M={}: sup error {:.3e}", dt, N, M, err);
        table += io::fmt(dt) + "," + std::to_string(N) + "," + std::to_string(M) + "," + io::fmt(err) + "," +
                 std::to_string(W.iteration_count) + "," + (W.converged ? "1" : "0") + "," + io::fmt(W.max_stderr) +
                 "\n";
      }
  io::write_text(o.out / "oracle_compare.csv", table);
  write_manifest(o.out, cfg, "oracle-compare", {"oracle_compare.csv", "riccati.csv"});
  return kOk;
}

int cmd_probe(const Options& o, const Config& cfg) {
  const auto cs = build_coefficients(cfg);
  const std::size_t n = cfg.probe.n_pairs;
  const auto w0 = probe_l2_monotone(*cs.W0, cfg.sampler, n, cfg.seed);
  const auto fg = probe_joint_monotone(*cs.F, *cs.G, cfg.sampler, n, cfg.seed);
  const auto coer = probe_terminal_coercivity(*cs.W0, cfg.sampler, n, cfg.seed);
  const auto fx = fit_weak_strong(*cs.F, *cs.G, cfg.sampler, n, cfg.seed, Direction::InX);
  const auto fw = fit_weak_strong(*cs.F, *cs.G, cfg.sampler, n, cfg.seed, Direction::InW);
  const bool growth = certify_growth(cs, cfg.sampler, n * cfg.sampler.atoms, cfg.seed);
  json j = {{"family", cs.family},
            {"dim", cs.dim},
            {"declared_regime", to_string(cs.regime.kind)},
            {"w0_l2_monotone", report_json(w0)},
            {"joint_monotone", report_json(fg)},
            {"terminal_coercivity", report_json(coer)},
            {"weak_strong_x", {{"alpha", fx.alpha}, {"L", fx.L}}},
            {"weak_strong_w", {{"alpha", fw.alpha}, {"L", fw.L}}},
            {"growth_constant", cs.growth_constant},
            {"growth_certified", growth},
            {"monotone", w0.passed && fg.passed}};
  write_json(o.out / "probe.json", j);
  write_manifest(o.out, cfg, "probe-monotonicity", {"probe.json"});
  if (o.require_monotone && !(w0.passed && fg.passed))
    throw GateError("coefficients are not L2-monotone (see probe.json for witness seeds)");
  return kOk;
}

const std::map<std::string, std::function<int(const Options&, const Config&)>>& commands() {
  static const std::map<std::string, std::function<int(const Options&, const Config&)>> m{
      {"solve", cmd_solve},
      {"verify-estimates", cmd_verify_estimates},
      {"regularize", cmd_regularize},
      {"oracle-compare", cmd_oracle_compare},
      {"probe-monotonicity", cmd_probe},
  };
  return m;
}

}  // namespace

std::vector<std::string> command_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : commands()) out.push_back(k);
  return out;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const GateError*>(&e)) return kMonotoneGate;
  if (dynamic_cast<const MissingInputError*>(&e)) return kMissingInput;
  if (dynamic_cast<const UnsupportedError*>(&e)) return kUnsupported;
  if (dynamic_cast<const ValidationError*>(&e)) return kValidation;
  return kFailure;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const GateError*>(&e)) return "monotonicity_gate";
  if (dynamic_cast<const MissingInputError*>(&e)) return "missing_input";
  if (dynamic_cast<const UnsupportedError*>(&e)) return "unsupported";
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
  if (dynamic_cast<const ValidationError*>(&e)) return "validation";
  if (dynamic_cast<const ConvergenceError*>(&e)) return "convergence";
  if (dynamic_cast<const SimulationError*>(&e)) return "simulation";
  if (dynamic_cast<const BlowUpError*>(&e)) return "blow_up";
  return "failure";
}

int run(const Options& opts) {
  init_logging();
  auto fail = [&](int code, const std::string& kind, const std::string& msg) {
    spdlog::error("{}", msg);
    try {
      write_json(opts.out / "error.json", {{"error", {{"code", code}, {"kind", kind}, {"message", msg}}}});
    } catch (const std::exception& e) {
      spdlog::error("could not write error.json: {}", e.what());
    }
    return code;
  };
  try {
    const auto& cmds = commands();
    const auto it = cmds.find(opts.command);
    if (it == cmds.end()) throw ValidationError("unknown command '" + opts.command + "'");
    if (opts.threads > 0) set_max_threads(opts.threads);
    const Config cfg = load_config(opts.config, opts.seed);
    fs::create_directories(opts.out);
    fs::remove(opts.out / "error.json");
    return it->second(opts, cfg);
  } catch (const std::exception& e) {
    return fail(exit_code_for(e), error_kind(e), e.what());
  }
}

}  // namespace mfg::cli
