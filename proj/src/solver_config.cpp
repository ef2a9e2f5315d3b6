#include "tunekit/solver_config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "tunekit/errors.hpp"

namespace tunekit {

namespace {

enum class Shape { number, list, either };

const std::map<std::string, std::map<std::string, Shape>>& schema() {
  static const std::map<std::string, std::map<std::string, Shape>> table = {
      {"grid", {{"points_per_dim", Shape::either}, {"batch_size", Shape::number}}},
      {"random", {{"batch_size", Shape::number}}},
      {"nelder-mead",
       {{"start", Shape::list}, {"tol", Shape::number}, {"step_fraction", Shape::number}}},
      {"pso",
       {{"num_particles", Shape::number},
        {"w", Shape::number},
        {"c1", Shape::number},
        {"c2", Shape::number},
        {"vmax_fraction", Shape::number}}},
      {"cmaes",
       {{"sigma0", Shape::number},
        {"lambda", Shape::number},
        {"start", Shape::list},
        {"tolx", Shape::number}}},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& solver_names() {
  static const std::vector<std::string> names = {"grid", "random", "nelder-mead", "pso", "cmaes"};
  return names;
}

SolverConfig::SolverConfig(std::string name, Settings settings)
    : name_(std::move(name)), settings_(std::move(settings)) {
  const auto it = schema().find(name_);
  if (it == schema().end()) throw SolverUnknown("unknown solver '" + name_ + "'");
  for (const auto& [key, value] : settings_) {
    const auto k = it->second.find(key);
    if (k == it->second.end()) {
      throw InvalidSetting("solver '" + name_ + "' has no setting '" + key + "'");
    }
    const bool is_list = std::holds_alternative<std::vector<double>>(value);
    if ((k->second == Shape::number && is_list) || (k->second == Shape::list && !is_list)) {
      throw InvalidSetting("setting '" + key + "' of solver '" + name_ + "' has the wrong type");
    }
    const auto check = [&](double v) {
      if (!std::isfinite(v)) throw InvalidSetting("setting '" + key + "' must be finite");
    };
    if (is_list) {
      for (double v : std::get<std::vector<double>>(value)) check(v);
    } else {
      check(std::get<double>(value));
    }
  }
}

double SolverConfig::number(const std::string& key, double fallback) const {
  const auto it = settings_.find(key);
  if (it == settings_.end()) return fallback;
  return std::get<double>(it->second);
}

std::vector<double> SolverConfig::list(const std::string& key) const {
  const auto it = settings_.find(key);
  if (it == settings_.end()) return {};
  if (const auto* v = std::get_if<double>(&it->second)) return {*v};
  return std::get<std::vector<double>>(it->second);
}

SolverConfig select_default_solver() {
  return SolverConfig("pso", {{"num_particles", 20.0}, {"w", 0.729}, {"c1", 1.49445}, {"c2", 1.49445}});
}

nlohmann::json to_json(const Settings& settings) {
  auto j = nlohmann::json::object();
  for (const auto& [key, value] : settings) {
    std::visit([&](const auto& v) { j[key] = v; }, value);
  }
  return j;
}

Settings settings_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidSetting("settings must be a JSON object");
  Settings out;
  for (const auto& [key, value] : j.items()) {
    if (value.is_number()) {
      out.emplace(key, value.get<double>());
    } else if (value.is_array() &&
               std::all_of(value.begin(), value.end(), [](const auto& e) { return e.is_number(); })) {
      out.emplace(key, value.get<std::vector<double>>());
    } else {
      throw InvalidSetting("setting '" + key + "' must be a number or a list of numbers");
    }
  }
  return out;
}

nlohmann::json to_json(const SolverConfig& config) {
  return {{"solver", config.name()}, {"settings", to_json(config.settings())}};
}

SolverConfig solver_config_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("solver") || !j["solver"].is_string()) {
    throw InvalidSetting("solver config needs a string 'solver' field");
  }
  Settings settings;
  if (j.contains("settings")) settings = settings_from_json(j["settings"]);
  return SolverConfig(j["solver"].get<std::string>(), std::move(settings));
}

}  // namespace tunekit
