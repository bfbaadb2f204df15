#include <cstdio>
#include <filesystem>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mfg/cli.hpp"
#include "mfg/io.hpp"

namespace {

int usage_error(const std::string& msg, const std::filesystem::path& out) {
  const nlohmann::json j = {{"error", {{"code", mfg::cli::kValidation}, {"kind", "usage"}, {"message", msg}}}};
  std::fprintf(stderr, "%s\n", j.dump().c_str());
  try {
    mfg::io::write_text(out / "error.json", j.dump(2) + "\n");
  } catch (const std::exception&) {
  }
  return mfg::cli::kValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Master-equation solver for monotone mean field games"};
  app.require_subcommand(1, 1);
  mfg::cli::Options opts;
  std::string config, out = "out";
  std::uint64_t seed = 0;
  int threads = 0;
  bool require_monotone = false, solve_first = false;

  const std::vector<std::pair<std::string, std::string>> subs{
      {"solve", "Picard solve, field, history and propagation report"},
      {"verify-estimates", "stability and measure-stability harnesses on a solved field"},
      {"regularize", "Yosida sweep with Lipschitz and growth certification"},
      {"oracle-compare", "solver vs linear-quadratic Riccati oracle over a (dt, N, M) grid"},
      {"probe-monotonicity", "sampled monotonicity, coercivity and weak-strong probes"},
  };
  std::vector<CLI::App*> cmds;
  for (const auto& [name, help] : subs) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--config", config, "TOML or JSON config")->required();
    s->add_option("--out", out, "output directory");
    s->add_option("--seed", seed, "root seed, overrides the config");
    s->add_option("--threads", threads, "worker cap; results do not depend on it")->check(CLI::NonNegativeNumber);
    s->add_flag("--require-monotone", require_monotone, "exit 3 unless the coefficients pass the monotonicity probes");
    s->add_flag("--solve-first", solve_first, "solve when no field exists (verify-estimates)");
    cmds.push_back(s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return usage_error(e.what(), out);
  }

  for (auto* s : cmds)
    if (s->parsed()) {
      opts.command = s->get_name();
      if (s->count("--seed")) opts.seed = seed;
    }
  opts.config = config;
  opts.out = out;
  opts.threads = static_cast<unsigned>(threads);
  opts.require_monotone = require_monotone;
  opts.solve_first = solve_first;
  return mfg::cli::run(opts);
}
