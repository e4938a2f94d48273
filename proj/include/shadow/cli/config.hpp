#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shadow/dynamics.hpp"
#include "shadow/errors.hpp"
#include "shadow/integrators.hpp"
#include "shadow/pipeline.hpp"
#include "shadow/shadowing.hpp"

namespace shadow::cli {

struct SystemConfig {
  std::string type = "lorenz63";  // lorenz63 | ks
  Lorenz63Params lorenz;
  KSGrid ks;
};

struct StudyConfig {
  std::string mode;  // "T" or "dt"
  std::vector<double> values;
  std::optional<double> reference;  // required for mode "T"
};

struct OracleConfig {
  double delta_s = 0.5;
  double window = 500.0;
  double spinup = 50.0;
  std::size_t ensemble = 20;
};

struct RunConfig {
  SystemConfig system;
  std::string objective = "default";
  std::string integrator = "rk4";
  MarchConfig march;
  AlgorithmChoice algorithm = AlgorithmChoice::automatic;
  std::size_t ensemble = 1;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string output_dir = "out";
  std::size_t adjoint_samples = 200;
  bool save_trajectory = false;
  std::string load_trajectory;
  std::optional<StudyConfig> study;
  OracleConfig oracle;

  /// Normalized JSON of every field, defaults filled in; the config hash is taken over its dump.
  nlohmann::ordered_json canonical;
};

/// Raised for malformed or inconsistent configuration documents.
class ConfigError : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

/// Parses and validates; unknown keys anywhere are rejected.
[[nodiscard]] RunConfig parse_config(const nlohmann::json& doc);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

[[nodiscard]] std::unique_ptr<DynamicalSystem> make_system(const RunConfig& config);
[[nodiscard]] Objective make_objective(const RunConfig& config);
[[nodiscard]] ButcherTableau make_tableau(const RunConfig& config);

/// FNV-1a 64 over the canonical dump.
[[nodiscard]] std::uint64_t config_hash(const RunConfig& config);

/// output_dir, placed under $SHADOW_MARCH_OUTPUT_ROOT when that is set and output_dir is relative.
[[nodiscard]] std::filesystem::path resolve_output_dir(const RunConfig& config);

}  // namespace shadow::cli
