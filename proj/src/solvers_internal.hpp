#pragma once

#include "tunekit/optimize.hpp"

namespace tunekit::detail {

/// Dispatches on the solver name and drives it to completion.
StopReason run_solver(const SolverConfig& config, EvalContext& ctx);

StopReason run_grid(const SolverConfig& config, EvalContext& ctx);
StopReason run_random(const SolverConfig& config, EvalContext& ctx);

/// Converts an optional positive integer setting; throws InvalidSetting otherwise.
std::size_t count_setting(const SolverConfig& config, const std::string& key, std::size_t fallback,
                          std::size_t minimum = 1);

/// Start point in canonical order, validated against the space and clamped.
std::vector<double> start_point(const SearchSpace& space,
                                const std::optional<std::vector<double>>& start);

}  // namespace tunekit::detail
