#pragma once

#include "zosmd/problems.hpp"
#include "zosmd/solver.hpp"

#include <json.hpp>

#include <memory>
#include <string>
#include <vector>

namespace zosmd {

// Configuration problems map to exit code 2; messages name the offending key.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct EvaluationSection {
  int seeds = 1;                  // multi-seed mode: seeds seed..seed+n-1
  long diagnostic_draws = 100000; // Monte-Carlo draws for cmd_diagnose
  long mc_risk_draws = 20000;     // risk estimates on empirical problems
};

struct OutputSection {
  std::string directory = "out";
  bool write_csv = true;
  bool write_json = true;
};

struct ExperimentConfig {
  // problem section
  std::string family;  // shifted-quadratic | piecewise-absolute | empirical-csv
  int m = 0;
  int d = 0;
  std::string domain_kind;  // ball | box
  double ball_radius = 1.0;
  Vec box_lo, box_hi;
  std::vector<Vec> centers;
  std::vector<double> noise_scales;
  std::vector<double> offsets;
  std::vector<std::string> csv_paths;
  bool csv_header = false;
  std::string empirical_loss = "quadratic";  // quadratic | absolute

  SolverConfig solver;
  EvaluationSection evaluation;
  OutputSection output;
};

ExperimentConfig parse_config(const nlohmann::json& j);
// Reads a config file; a report file (schema_version + config) is unwrapped
// so a run can be reproduced straight from its own artifact.
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

WeightDomain build_domain(const ExperimentConfig& cfg);
std::unique_ptr<Problem> build_problem(const ExperimentConfig& cfg);

}  // namespace zosmd
