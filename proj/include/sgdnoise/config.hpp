#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgdnoise/averaging.hpp"
#include "sgdnoise/equivalence.hpp"
#include "sgdnoise/model.hpp"
#include "sgdnoise/schedule.hpp"

namespace sgdnoise {

/// Invalid configuration; what() starts with the JSON field path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class ScenarioKind {
  multiscale,
  two_point,
  stationary_check,
  equivalence,
  basins,
  single_step_profile,
  interpolation,
  gradient_alignment,
};

std::string to_string(ScenarioKind kind);
std::optional<ScenarioKind> scenario_from_string(const std::string& name);
const std::vector<std::string>& scenario_names();

struct Theta0Spec {
  enum class Kind { zeros, fill, values, gaussian } kind = Kind::zeros;
  double scale = 0.0;
  std::vector<double> values;
};

struct ScenarioConfig {
  ScenarioKind scenario = ScenarioKind::stationary_check;
  EnsembleSpec ensemble;
  std::vector<Schedule> schedules;
  std::vector<KernelSpec> kernels;
  std::optional<AveragingSpec> averaging;
  std::uint64_t steps = 0;
  std::size_t batch_size = 1;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";
  Theta0Spec theta0;
  nlohmann::json params = nlohmann::json::object();
  nlohmann::json source;  // the document as read
};

/// Parses and validates a scenario document. Unknown keys anywhere are errors.
ScenarioConfig parse_scenario_config(const nlohmann::json& doc);
ScenarioConfig load_scenario_config(const std::filesystem::path& path);

EnsembleSpec parse_ensemble_spec(const nlohmann::json& j, const std::string& path = "ensemble");
nlohmann::json to_json(const EnsembleSpec& spec);

Schedule parse_schedule(const nlohmann::json& j, const std::string& path = "schedule");
KernelSpec parse_kernel_spec(const nlohmann::json& j, const std::string& path = "kernel");
nlohmann::json to_json(const KernelSpec& spec);
AveragingSpec parse_averaging_spec(const nlohmann::json& j, const std::string& path = "averaging");

/// Scenario-specific parameter with a default; `allowed` lists every key the
/// scenario understands and is checked by parse_scenario_config.
double param_double(const ScenarioConfig& cfg, const std::string& key, double fallback);
std::uint64_t param_uint(const ScenarioConfig& cfg, const std::string& key, std::uint64_t fallback);
bool param_bool(const ScenarioConfig& cfg, const std::string& key, bool fallback);

VectorXd make_theta0(const Theta0Spec& spec, Eigen::Index d, std::uint64_t seed);

}  // namespace sgdnoise
