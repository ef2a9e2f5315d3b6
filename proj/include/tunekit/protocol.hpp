#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tunekit/constraints.hpp"
#include "tunekit/objective.hpp"
#include "tunekit/optimize.hpp"
#include "tunekit/search_space.hpp"
#include "tunekit/solver_config.hpp"

/// Line-delimited JSON messages exchanged between the engine and an external
/// environment. Every message is one JSON object on one newline-terminated
/// line; the kind is identified by its discriminating key.
namespace tunekit::protocol {

/// Environment -> engine, first message. Discriminator: "space".
struct ConfigMsg {
  std::string solver = "pso";
  Settings settings{};
  SearchSpace space;
  std::vector<Constraint> constraints{};
  /// Score reported for constraint-violating points; required with constraints.
  std::optional<double> default_value{};
  Direction direction = Direction::maximize;
  std::size_t max_evals = 0;
  std::uint64_t seed = 0;

  SolverConfig solver_config() const { return SolverConfig(solver, settings); }

  friend bool operator==(const ConfigMsg&, const ConfigMsg&) = default;
};

/// Engine -> environment. Discriminator: "candidates".
struct EvalRequest {
  std::uint64_t request_id = 0;
  std::vector<ParamVector> candidates;

  friend bool operator==(const EvalRequest&, const EvalRequest&) = default;
};

/// Environment -> engine. Discriminator: "values". Each value is a number or
/// {"error": string}.
struct EvalReply {
  std::uint64_t request_id = 0;
  std::vector<Outcome> values;

  friend bool operator==(const EvalReply&, const EvalReply&) = default;
};

/// Engine -> environment, final message. Discriminator: "solution".
struct ResultMsg {
  ParamVector solution;
  double optimum = 0.0;
  std::size_t num_evals = 0;
  double time = 0.0;  ///< seconds

  friend bool operator==(const ResultMsg&, const ResultMsg&) = default;
};

/// Either direction. Discriminator: "error".
struct ErrorMsg {
  std::string error;

  friend bool operator==(const ErrorMsg&, const ErrorMsg&) = default;
};

using Message = std::variant<ConfigMsg, EvalRequest, EvalReply, ResultMsg, ErrorMsg>;

/// Single newline-terminated UTF-8 JSON line.
std::string encode(const Message& msg);

/// Parses one line (trailing newline optional). Throws MalformedJson when the
/// text is not a single JSON value and SchemaViolation, naming the field, for
/// any structural problem.
Message decode(std::string_view line);

/// Summary of a finished run in ResultMsg form; the CLI report uses the same schema.
ResultMsg make_result(const OptimizationResult& result);

}  // namespace tunekit::protocol
