#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfg/coefficients.hpp"
#include "mfg/dynamics.hpp"
#include "mfg/error.hpp"
#include "mfg/solver.hpp"

namespace mfg::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kValidation = 2,
  kMonotoneGate = 3,
  kMissingInput = 4,
  kUnsupported = 5,
};

/// Raised by a command whose --require-monotone gate rejects the coefficients.
struct GateError : Error {
  using Error::Error;
};
/// A required input artifact (solved field) is absent.
struct MissingInputError : Error {
  using Error::Error;
};

struct InitialMeasureSpec {
  std::string kind = "gaussian";  // gaussian | dirac | uniform | csv
  std::vector<double> mean;       // gaussian center / dirac point
  double std = 1.0;
  double lo = -1.0, hi = 1.0;
  std::size_t atoms = 1000;
  std::string path;
};

struct EstimatesConfig {
  std::vector<double> sizes{1e-1, 1e-2, 1e-3};
  std::vector<double> measure_deltas{1e-1, 5e-2, 2.5e-2};
  double slack = 0.2;
  std::string field;  // solved field directory; empty means <out>/field
};

struct RegularizeConfig {
  std::string base = "cubic_clipped";
  Params params;
  std::vector<double> epsilons{1.0, 0.5, 0.25, 0.125};
  std::optional<double> growth_constant;  // declared constant; enforces eps < 1/C
  double shift_constant = 0.0;
  std::size_t n_clouds = 16;
  std::size_t n_pairs = 200;
  std::size_t growth_samples = 10000;
};

struct OracleCompareConfig {
  std::vector<double> dts{0.02, 0.01};
  std::vector<std::size_t> Ns{1000, 4000};
  std::vector<std::size_t> Ms{100};
  double oracle_dt = 1e-4;
};

struct ProbeConfig {
  std::size_t n_pairs = 1000;
};

struct PropagationConfig {
  std::size_t n_pairs = 200;
  std::size_t time_stride = 1;
};

struct Config {
  std::uint64_t seed = 0;
  std::string family = "lq";
  std::size_t dim = 1;
  Params params;
  std::optional<std::string> regime;
  std::optional<double> alpha, L, gamma, growth_constant;

  double T = 1.0, dt = 0.01;
  std::size_t N = 1000, M = 100;
  double sigma_x = 0.0, beta = 0.0;
  ThetaSpec theta;
  std::vector<double> theta0;

  std::vector<InitialMeasureSpec> initial_measures;
  GridSpec grid;
  PicardOptions picard;
  SamplerSpec sampler;
  EstimatesConfig estimates;
  PropagationConfig propagation;
  RegularizeConfig regularize;
  OracleCompareConfig oracle_compare;
  ProbeConfig probe;

  nlohmann::json resolved;  // every key with its default filled in
  std::string hash;         // fnv1a64 of the resolved config, hex
};

/// TOML (default) or JSON (.json extension) file into a validated Config; ValidationError on bad input.
Config load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = std::nullopt);
Config parse_config(const nlohmann::json& raw, std::optional<std::uint64_t> seed_override = std::nullopt);
nlohmann::json toml_to_json(std::string_view toml_text);

std::string fnv1a64_hex(std::string_view bytes);

CoefficientSet build_coefficients(const Config& cfg);
std::vector<EmpiricalMeasure> build_initial_measures(const Config& cfg);
SolverScenario build_scenario(const Config& cfg);

struct Options {
  std::string command;
  std::filesystem::path config;
  std::filesystem::path out = "out";
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;  // 0 keeps the default
  bool require_monotone = false;
  bool solve_first = false;
};

std::vector<std::string> command_names();

/// Runs one command; on failure writes <out>/error.json and returns the exit code.
int run(const Options& opts);

int exit_code_for(const std::exception& e);
std::string error_kind(const std::exception& e);

}  // namespace mfg::cli
