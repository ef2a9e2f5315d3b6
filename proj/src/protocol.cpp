#include "tunekit/protocol.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "tunekit/errors.hpp"

namespace tunekit::protocol {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

json params_json(const ParamVector& p) { return to_json(p); }

ParamVector params_from(const json& j, const std::string& field) {
  if (!j.is_object()) throw SchemaViolation(field, "expected an object of name -> number");
  std::vector<std::string> names;
  std::vector<double> values;
  for (const auto& [name, v] : j.items()) {
    if (!v.is_number()) throw SchemaViolation(field + "." + name, "expected a number");
    names.push_back(name);
    values.push_back(v.get<double>());
  }
  return ParamVector(std::move(names), std::move(values));
}

void allow_only(const json& j, std::initializer_list<const char*> keys) {
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw SchemaViolation(key, "unknown field");
  }
}

const json& require(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaViolation(key, "missing field");
  return *it;
}

std::uint64_t unsigned_field(const json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_number_unsigned()) throw SchemaViolation(key, "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

double number_field(const json& v, const std::string& key) {
  if (!v.is_number()) throw SchemaViolation(key, "expected a number");
  return v.get<double>();
}

ConfigMsg decode_config(const json& j) {
  allow_only(j, {"solver", "settings", "space", "constraints", "default_value", "direction",
                 "max_evals", "seed"});
  const auto space = [&] {
    try {
      return space_from_json(require(j, "space"));
    } catch (const SchemaViolation&) {
      throw;
    } catch (const Error& e) {
      throw SchemaViolation("space", e.what());
    }
  }();
  ConfigMsg msg{.space = space};
  if (j.contains("solver")) {
    if (!j["solver"].is_string()) throw SchemaViolation("solver", "expected a string");
    msg.solver = j["solver"].get<std::string>();
  }
  if (j.contains("settings")) {
    try {
      msg.settings = settings_from_json(j["settings"]);
    } catch (const Error& e) {
      throw SchemaViolation("settings", e.what());
    }
  }
  try {
    msg.solver_config();
  } catch (const SolverUnknown& e) {
    throw SchemaViolation("solver", e.what());
  } catch (const Error& e) {
    throw SchemaViolation("settings", e.what());
  }
  if (j.contains("constraints")) {
    try {
      msg.constraints = constraints_from_json(j["constraints"]);
    } catch (const Error& e) {
      throw SchemaViolation("constraints", e.what());
    }
    for (const auto& c : msg.constraints) {
      const auto& names = msg.space.names();
      if (std::find(names.begin(), names.end(), c.dim()) == names.end()) {
        throw SchemaViolation("constraints", "unknown dimension '" + c.dim() + "'");
      }
    }
  }
  if (j.contains("default_value")) msg.default_value = number_field(j["default_value"], "default_value");
  if (!msg.constraints.empty() && !msg.default_value) {
    throw SchemaViolation("default_value", "required when constraints are given");
  }
  if (j.contains("direction")) {
    if (!j["direction"].is_string()) throw SchemaViolation("direction", "expected a string");
    try {
      msg.direction = direction_from_string(j["direction"].get<std::string>());
    } catch (const Error& e) {
      throw SchemaViolation("direction", e.what());
    }
  }
  msg.max_evals = unsigned_field(j, "max_evals");
  if (msg.max_evals == 0) throw SchemaViolation("max_evals", "must be at least 1");
  if (j.contains("seed")) msg.seed = unsigned_field(j, "seed");
  return msg;
}

EvalRequest decode_request(const json& j) {
  allow_only(j, {"request_id", "candidates"});
  EvalRequest msg;
  msg.request_id = unsigned_field(j, "request_id");
  const auto& c = require(j, "candidates");
  if (!c.is_array()) throw SchemaViolation("candidates", "expected an array");
  for (std::size_t i = 0; i < c.size(); ++i) {
    msg.candidates.push_back(params_from(c[i], "candidates[" + std::to_string(i) + "]"));
  }
  return msg;
}

EvalReply decode_reply(const json& j) {
  allow_only(j, {"request_id", "values"});
  EvalReply msg;
  msg.request_id = unsigned_field(j, "request_id");
  const auto& v = require(j, "values");
  if (!v.is_array()) throw SchemaViolation("values", "expected an array");
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto field = "values[" + std::to_string(i) + "]";
    const auto& e = v[i];
    if (e.is_number()) {
      msg.values.push_back(Outcome::success(e.get<double>()));
    } else if (e.is_object() && e.size() == 1 && e.contains("error") && e["error"].is_string()) {
      msg.values.push_back(Outcome::failure(e["error"].get<std::string>()));
    } else {
      throw SchemaViolation(field, "expected a number or {\"error\": string}");
    }
  }
  return msg;
}

ResultMsg decode_result(const json& j) {
  allow_only(j, {"solution", "optimum", "stats"});
  ResultMsg msg;
  msg.solution = params_from(require(j, "solution"), "solution");
  msg.optimum = number_field(require(j, "optimum"), "optimum");
  const auto& stats = require(j, "stats");
  if (!stats.is_object()) throw SchemaViolation("stats", "expected an object");
  for (const auto& [key, _] : stats.items()) {
    if (key != "num_evals" && key != "time") throw SchemaViolation("stats." + key, "unknown field");
  }
  const auto& n = require(stats, "num_evals");
  if (!n.is_number_unsigned()) throw SchemaViolation("stats.num_evals", "expected a nonnegative integer");
  msg.num_evals = n.get<std::size_t>();
  msg.time = number_field(require(stats, "time"), "stats.time");
  return msg;
}

ErrorMsg decode_error(const json& j) {
  allow_only(j, {"error"});
  const auto& e = j["error"];
  if (!e.is_string()) throw SchemaViolation("error", "expected a string");
  return ErrorMsg{e.get<std::string>()};
}

}  // namespace

std::string encode(const Message& msg) {
  const json j = std::visit(
      overloaded{
          [](const ConfigMsg& m) {
            json o{{"solver", m.solver},
                   {"settings", to_json(m.settings)},
                   {"space", to_json(m.space)},
                   {"direction", to_string(m.direction)},
                   {"max_evals", m.max_evals},
                   {"seed", m.seed}};
            if (!m.constraints.empty()) o["constraints"] = to_json(m.constraints);
            if (m.default_value) o["default_value"] = *m.default_value;
            return o;
          },
          [](const EvalRequest& m) {
            json c = json::array();
            for (const auto& p : m.candidates) c.push_back(params_json(p));
            return json{{"request_id", m.request_id}, {"candidates", std::move(c)}};
          },
          [](const EvalReply& m) {
            json v = json::array();
            for (const auto& o : m.values) {
              if (o.ok()) {
                v.push_back(*o.score);
              } else {
                v.push_back(json{{"error", o.error}});
              }
            }
            return json{{"request_id", m.request_id}, {"values", std::move(v)}};
          },
          [](const ResultMsg& m) {
            return json{{"solution", params_json(m.solution)},
                        {"optimum", m.optimum},
                        {"stats", {{"num_evals", m.num_evals}, {"time", m.time}}}};
          },
          [](const ErrorMsg& m) { return json{{"error", m.error}}; },
      },
      msg);
  // dump() escapes control characters, so the line never contains a raw newline.
  return j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}

Message decode(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.find('\n') != std::string_view::npos) throw MalformedJson("message spans several lines");
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw MalformedJson(std::string("malformed json: ") + e.what());
  }
  if (!j.is_object()) throw SchemaViolation("<message>", "expected a JSON object");

  static const char* const kinds[] = {"space", "candidates", "values", "solution", "error"};
  const char* kind = nullptr;
  for (const char* k : kinds) {
    if (j.contains(k)) {
      if (kind) throw SchemaViolation(k, std::string("conflicts with discriminator '") + kind + "'");
      kind = k;
    }
  }
  if (!kind) throw SchemaViolation("<message>", "no known discriminator key");
  const std::string_view k(kind);
  if (k == "space") return decode_config(j);
  if (k == "candidates") return decode_request(j);
  if (k == "values") return decode_reply(j);
  if (k == "solution") return decode_result(j);
  return decode_error(j);
}

ResultMsg make_result(const OptimizationResult& result) {
  return ResultMsg{result.best_params, result.best_score, result.num_evals, result.wall_time.count()};
}

}  // namespace tunekit::protocol
