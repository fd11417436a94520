#pragma once

#include "weaklab/pricing.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace weaklab {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ModelSpec {
  std::string name = "ou";  // constant, ou, gbm, black_scholes, bounded_vol
  int dim = 1;
  double theta = 1.0;
  double sigma = 1.0;
  double mu = 0.0;
  double a0 = 0.0, b0 = 0.5, c0 = 0.4;
  Vector drift;      // constant model
  Matrix diffusion;  // constant model
  bool require_ellipticity = false;
};

SdeModel build_model(const ModelSpec& spec);

struct FunctionSpec {
  std::string name = "identity";
  int q = 2;
  double value = 1.0;
  double level = 0.0;
  double rate = 1.0;
  Vector y;
  std::vector<int> beta;
};

TestFunction build_function(const FunctionSpec& spec, int dim);

struct StudyConfig {
  std::string study;
  ModelSpec model;
  std::optional<FunctionSpec> function;
  std::optional<Payoff> payoff;
  std::vector<int> n_ladder;
  std::uint64_t n_samples = 0;  // 0: sized by the CI gate (capped)
  std::uint64_t sample_cap = 1000000;
  std::uint64_t pilot = 10000;
  std::uint64_t seed = 1;
  std::vector<double> times{1.0};
  std::vector<Vector> points;   // starting points x, or spots v for greeks
  std::vector<Vector> targets;  // y grid for density and tailbound
  std::string mode = "both";    // monte-carlo, deterministic, both
  std::vector<Quantity> quantities{Quantity::Price, Quantity::Delta};
  int n_ref = 0;
  int richardson_n = 0;
  int order = 2;
  int moment = 4;
  std::optional<double> expected;
  std::map<std::string, double> tolerances;
  std::string csv_path;
  std::string json_path;

  bool monte_carlo() const { return mode != "deterministic"; }
  bool deterministic() const { return mode != "monte-carlo"; }
};

/// Parses and validates a config document. Unknown keys, wrong types and
/// out-of-range values raise ConfigError naming the offending field.
StudyConfig parse_config(const std::string& json_text);
StudyConfig load_config(const std::string& path);

/// Study names with a one-line description.
std::vector<std::pair<std::string, std::string>> study_catalog();

struct StudyRow {
  std::string study, model, f;
  double t = 0.0;
  std::string x;
  int n = 0;
  std::uint64_t N = 0;
  double estimate = 0.0;
  std::optional<double> truth;
  double bias = 0.0;
  double ci_halfwidth = 0.0;
  std::string oracle;
};

struct GateResult {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::string detail;
};

struct StudyReport {
  std::string study;
  std::string status;  // pass, fail, exact-scheme
  std::vector<StudyRow> rows;
  std::vector<GateResult> gates;
  std::string summary_json;

  bool passed() const;
  std::vector<std::string> failed_gates() const;
};

StudyReport run_study(const StudyConfig& config);

std::string render_csv(const std::vector<StudyRow>& rows);
/// Writes the CSV and JSON files named in the config (when set).
void write_report(const StudyReport& report, const StudyConfig& config);

enum ExitCode : int { kExitPass = 0, kExitGate = 2, kExitConfig = 3, kExitNumerical = 4 };

struct StudyOutcome {
  int exit_code = kExitPass;
  std::string message;
  std::optional<StudyReport> report;
};

/// Parse, run and write; every failure is mapped to an exit code.
StudyOutcome execute_config(const std::string& json_text, bool write_files = true);

}  // namespace weaklab
