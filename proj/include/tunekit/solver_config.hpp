#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace tunekit {

using SettingValue = std::variant<double, std::vector<double>>;
using Settings = std::map<std::string, SettingValue>;

/// Solver name plus its settings. Construction rejects unknown solver names
/// (SolverUnknown) and unknown or mistyped setting keys (InvalidSetting).
///
/// Recognized settings:
///   grid         points_per_dim (number or per-dimension list), batch_size
///   random       batch_size
///   nelder-mead  start (list), tol, step_fraction
///   pso          num_particles, w, c1, c2, vmax_fraction
///   cmaes        sigma0, lambda, start (list), tolx
class SolverConfig {
 public:
  explicit SolverConfig(std::string name, Settings settings = {});

  const std::string& name() const noexcept { return name_; }
  const Settings& settings() const noexcept { return settings_; }

  bool has(const std::string& key) const { return settings_.count(key) != 0; }
  double number(const std::string& key, double fallback) const;
  std::vector<double> list(const std::string& key) const;

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;

 private:
  std::string name_;
  Settings settings_;
};

/// Names accepted by SolverConfig.
const std::vector<std::string>& solver_names();

/// Particle swarm with constriction-coefficient defaults.
SolverConfig select_default_solver();

/// {"solver": name, "settings": {...}}
nlohmann::json to_json(const SolverConfig& config);
SolverConfig solver_config_from_json(const nlohmann::json& j);
Settings settings_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Settings& settings);

}  // namespace tunekit
