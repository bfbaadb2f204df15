#include <filesystem>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "mfg/cli.hpp"
#include "mfg/io.hpp"

using namespace mfg;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("mfg_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kSmallLq = R"(seed = 3

[coefficients]
family = "lq"
params = { q = 1.0, q_bar = 0.25, p = 1.0, p_bar = 0.25 }

[scenario]
T = 0.2
dt = 0.05
N = 100
M = 8
sigma_x = 0.1

[[initial_measures]]
kind = "gaussian"
mean = 0.5
std = 0.5
atoms = 100

[grid]
n = 5
shifts = [-0.5, 0.0, 0.5]

[picard]
tol = 1e-6

[propagation]
n_pairs = 20

[probe]
n_pairs = 50

[oracle_compare]
dts = [0.05]
Ns = [100]
Ms = [8]
)";

int run_cmd(const std::string& cmd, const fs::path& cfg, const fs::path& out, bool solve_first = false,
            bool gate = false) {
  cli::Options o;
  o.command = cmd;
  o.config = cfg;
  o.out = out;
  o.solve_first = solve_first;
  o.require_monotone = gate;
  return cli::run(o);
}

json error_of(const fs::path& out) { return json::parse(io::read_text(out / "error.json")); }

}  // namespace

TEST_CASE("TOML is converted to JSON") {
  const auto j = cli::toml_to_json("a = 1\n[b]\nc = [1.5, 2]\nd = \"x\"\n");
  CHECK(j["a"] == 1);
  CHECK(j["b"]["c"][0] == 1.5);
  CHECK(j["b"]["d"] == "x");
  CHECK_THROWS_AS(cli::toml_to_json("a = = 1"), ValidationError);
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(cli::parse_config(json::object()));
  CHECK_THROWS_AS(cli::parse_config({{"scenario", {{"T", 1.0}, {"dt", 0.3}}}}), ValidationError);
  CHECK_THROWS_AS(cli::parse_config({{"scenario", {{"N", 0}}}}), ValidationError);
  CHECK_THROWS_AS(cli::parse_config({{"picard", {{"tol", 0.0}}}}), ValidationError);
  CHECK_THROWS_AS(cli::parse_config({{"bogus", 1}}), ValidationError);
  CHECK_THROWS_AS(cli::parse_config({{"scenario", {{"dtt", 0.1}}}}), ValidationError);
}

TEST_CASE("config defaults, hashing and seed override") {
  const auto a = cli::parse_config(json::object());
  const auto b = cli::parse_config({{"seed", 0}, {"scenario", {{"T", 1.0}}}});
  CHECK(a.hash == b.hash);
  CHECK(a.hash.size() == 16);
  const auto c = cli::parse_config(json::object(), 5);
  CHECK(c.seed == 5);
  CHECK(c.hash != a.hash);
  CHECK(a.resolved.contains("picard"));
  CHECK(cli::parse_config({{"threads", 4}}).hash == a.hash);
  CHECK(cli::fnv1a64_hex("") == "cbf29ce484222325");
}

TEST_CASE("scenario assembly") {
  const auto cfg = cli::parse_config(cli::toml_to_json(kSmallLq));
  const auto cs = cli::build_coefficients(cfg);
  CHECK(cs.family == "lq");
  const auto sc = cli::build_scenario(cfg);
  CHECK(sc.references.size() == 1);
  CHECK(sc.references[0].size() == 100);
  CHECK(sc.references[0].mean()[0] == doctest::Approx(0.5).epsilon(0.3));
  CHECK(sc.grid.shifts.size() == 3);
  CHECK(sc.config_hash == cfg.hash);
}

TEST_CASE("command exit codes") {
  const auto dir = scratch("codes");
  io::write_text(dir / "lq.toml", kSmallLq);

  SUBCASE("solve writes a field and manifest") {
    CHECK(run_cmd("solve", dir / "lq.toml", dir / "out") == cli::kOk);
    CHECK(fs::exists(dir / "out/field/manifest.json"));
    CHECK(fs::exists(dir / "out/history.csv"));
    CHECK(fs::exists(dir / "out/z_report.json"));
    const auto m = json::parse(io::read_text(dir / "out/manifest.json"));
    CHECK(m["tool"] == "mfg");
    CHECK(m["seed"] == 3);
    CHECK(m["config_hash"].get<std::string>().size() == 16);
    CHECK_FALSE(fs::exists(dir / "out/error.json"));
  }
  SUBCASE("dt not dividing T") {
    std::string bad = kSmallLq;
    bad.replace(bad.find("dt = 0.05"), 9, "dt = 0.03");
    io::write_text(dir / "bad.toml", bad);
    CHECK(run_cmd("solve", dir / "bad.toml", dir / "out") == cli::kValidation);
    CHECK(error_of(dir / "out")["error"]["code"] == 2);
    CHECK(error_of(dir / "out")["error"]["kind"] == "validation");
  }
  SUBCASE("monotone gate") {
    std::string bad = kSmallLq;
    bad.replace(bad.find("p = 1.0"), 7, "p = -1.0");
    io::write_text(dir / "nonmono.toml", bad);
    CHECK(run_cmd("solve", dir / "nonmono.toml", dir / "out", false, true) == cli::kMonotoneGate);
    CHECK(error_of(dir / "out")["error"]["kind"] == "monotonicity_gate");
    CHECK_FALSE(fs::exists(dir / "out/field"));
  }
  SUBCASE("missing field") {
    CHECK(run_cmd("verify-estimates", dir / "lq.toml", dir / "empty") == cli::kMissingInput);
    CHECK(error_of(dir / "empty")["error"]["code"] == 4);
  }
  SUBCASE("verify-estimates with solve-first") {
    CHECK(run_cmd("verify-estimates", dir / "lq.toml", dir / "est", true) == cli::kOk);
    CHECK(fs::exists(dir / "est/estimates_state.csv"));
    CHECK(fs::exists(dir / "est/estimates.json"));
  }
  SUBCASE("oracle-compare") {
    CHECK(run_cmd("oracle-compare", dir / "lq.toml", dir / "oc") == cli::kOk);
    const auto csv = io::read_text(dir / "oc/oracle_compare.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    io::write_text(dir / "zero.toml", "[coefficients]\nfamily = \"zero\"\n");
    CHECK(run_cmd("oracle-compare", dir / "zero.toml", dir / "oc2") == cli::kUnsupported);
  }
  SUBCASE("probe-monotonicity") {
    CHECK(run_cmd("probe-monotonicity", dir / "lq.toml", dir / "probe") == cli::kOk);
    const auto j = json::parse(io::read_text(dir / "probe/probe.json"));
    CHECK(j["w0_l2_monotone"]["passed"] == true);
  }
  SUBCASE("regularize rejects eps >= 1/C") {
    io::write_text(dir / "reg.toml",
                   "[regularize]\nbase = \"cubic_clipped\"\nepsilons = [0.1]\ngrowth_constant = 300.0\n");
    CHECK(run_cmd("regularize", dir / "reg.toml", dir / "reg") == cli::kValidation);
  }
  SUBCASE("unknown family and command") {
    io::write_text(dir / "fam.toml", "[coefficients]\nfamily = \"nope\"\n");
    CHECK(run_cmd("solve", dir / "fam.toml", dir / "fam") == cli::kUnsupported);
    CHECK(run_cmd("frobnicate", dir / "lq.toml", dir / "x") == cli::kValidation);
    CHECK(run_cmd("solve", dir / "missing.toml", dir / "x") == cli::kValidation);
  }
  fs::remove_all(dir);
}

TEST_CASE("exit code mapping") {
  CHECK(cli::exit_code_for(ValidationError("x")) == 2);
  CHECK(cli::exit_code_for(DimensionError("x")) == 2);
  CHECK(cli::exit_code_for(cli::GateError("x")) == 3);
  CHECK(cli::exit_code_for(cli::MissingInputError("x")) == 4);
  CHECK(cli::exit_code_for(UnsupportedError("x")) == 5);
  CHECK(cli::exit_code_for(ConvergenceError("x", 1.0, 2)) == 1);
  CHECK(cli::exit_code_for(std::runtime_error("x")) == 1);
  CHECK(cli::command_names().size() == 5);
}
