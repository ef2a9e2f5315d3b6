#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tunekit/objective.hpp"
#include "tunekit/search_space.hpp"
#include "tunekit/solver_config.hpp"

namespace tunekit {

enum class Direction { maximize, minimize };

std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);

/// Hard cap on objective evaluations; max_evals must be positive.
struct Budget {
  std::size_t max_evals = 0;
};

enum class StopReason {
  budget,     ///< evaluation budget spent
  converged,  ///< solver-specific convergence test fired
  completed,  ///< solver enumerated all of its candidates (grid)
  stalled,    ///< solver cannot make further progress (e.g. CMA-ES conditioning)
};

std::string to_string(StopReason r);

struct RunOptions {
  std::uint64_t seed = 0;
  /// Threads used for batch evaluation of concurrent-safe objectives.
  std::size_t parallelism = 1;
  /// Serve repeated parameter vectors from the call log without spending budget.
  bool dedupe = false;
};

struct OptimizationResult {
  ParamVector best_params;
  double best_score = 0.0;
  std::size_t num_evals = 0;
  std::vector<TrialRecord> call_log;
  std::string solver_name;
  std::chrono::duration<double> wall_time{};
  StopReason stop_reason = StopReason::budget;
};

/// Budget-enforcing evaluation channel between a solver and the objective.
///
/// Solvers always minimize a loss: the score under Direction::minimize and its
/// negation under Direction::maximize. Failed evaluations cost budget and show
/// up as +inf. Every evaluated point is clamped into the box first and logged.
class EvalContext {
 public:
  EvalContext(Objective& objective, const SearchSpace& space, Direction direction, Budget budget,
              RunOptions options = {});

  /// Scores raw canonical-order points. Returns at most remaining() losses: a
  /// short result means the budget ran out part-way through the batch.
  std::vector<double> evaluate(std::span<const std::vector<double>> points);
  /// Single-point convenience; empty when nothing could be evaluated.
  std::optional<double> evaluate(const std::vector<double>& point);

  std::size_t remaining() const noexcept;
  bool exhausted() const noexcept;
  std::size_t num_evals() const noexcept { return log_.size(); }

  const SearchSpace& space() const noexcept { return space_; }
  Direction direction() const noexcept { return direction_; }
  std::uint64_t seed() const noexcept { return options_.seed; }
  const std::vector<TrialRecord>& log() const noexcept { return log_; }

  /// Lowest loss seen so far (+inf before any success).
  double best_loss() const noexcept { return best_loss_; }

  /// Packages the run. Throws BudgetExhaustedWithNoSuccess if nothing succeeded.
  OptimizationResult finish(std::string solver_name, StopReason reason) &&;

 private:
  double loss_of(const Outcome& o) const;

  Objective& objective_;
  SearchSpace space_;
  Direction direction_;
  Budget budget_;
  RunOptions options_;
  std::vector<TrialRecord> log_;
  std::map<std::vector<double>, std::size_t> seen_;
  std::size_t cache_hits_ = 0;
  std::size_t batches_ = 0;
  double best_loss_;
  std::optional<std::size_t> best_index_;
  std::chrono::steady_clock::time_point started_;
};

/// Runs the configured solver until it converges or the budget is spent.
/// Deterministic given (config, options.seed, objective).
OptimizationResult optimize(const SolverConfig& config, Objective& objective,
                            const SearchSpace& space, Direction direction, Budget budget,
                            const RunOptions& options = {});

/// Solver defaults to select_default_solver() when omitted.
OptimizationResult maximize(Objective& objective, const SearchSpace& space, Budget budget,
                            const std::optional<SolverConfig>& solver = std::nullopt,
                            const RunOptions& options = {});
OptimizationResult minimize(Objective& objective, const SearchSpace& space, Budget budget,
                            const std::optional<SolverConfig>& solver = std::nullopt,
                            const RunOptions& options = {});

using ObjectiveFn = std::function<double(const ParamVector&)>;

OptimizationResult maximize(const ObjectiveFn& f, const SearchSpace& space, Budget budget,
                            const std::optional<SolverConfig>& solver = std::nullopt,
                            const RunOptions& options = {});
OptimizationResult minimize(const ObjectiveFn& f, const SearchSpace& space, Budget budget,
                            const std::optional<SolverConfig>& solver = std::nullopt,
                            const RunOptions& options = {});

}  // namespace tunekit
