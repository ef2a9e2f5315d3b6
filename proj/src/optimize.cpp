#include "tunekit/optimize.hpp"

#include <algorithm>
#include <limits>

#include "solvers_internal.hpp"
#include "tunekit/batch_eval.hpp"
#include "tunekit/errors.hpp"

namespace tunekit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Cache hits are free, so a solver stuck on already-seen points could spin forever.
constexpr std::size_t kCacheHitFactor = 100;

}  // namespace

std::string to_string(Direction d) { return d == Direction::maximize ? "maximize" : "minimize"; }

Direction direction_from_string(const std::string& s) {
  if (s == "maximize") return Direction::maximize;
  if (s == "minimize") return Direction::minimize;
  throw InvalidSetting("direction must be 'maximize' or 'minimize', got '" + s + "'");
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::budget: return "budget";
    case StopReason::converged: return "converged";
    case StopReason::completed: return "completed";
    case StopReason::stalled: return "stalled";
  }
  return "unknown";
}

EvalContext::EvalContext(Objective& objective, const SearchSpace& space, Direction direction,
                         Budget budget, RunOptions options)
    : objective_(objective),
      space_(space),
      direction_(direction),
      budget_(budget),
      options_(options),
      best_loss_(kInf),
      started_(std::chrono::steady_clock::now()) {
  if (budget_.max_evals == 0) throw InvalidSetting("budget must allow at least one evaluation");
}

std::size_t EvalContext::remaining() const noexcept { return budget_.max_evals - log_.size(); }

bool EvalContext::exhausted() const noexcept {
  return remaining() == 0 || cache_hits_ > kCacheHitFactor * budget_.max_evals;
}

double EvalContext::loss_of(const Outcome& o) const {
  if (!o.ok()) return kInf;
  return direction_ == Direction::minimize ? *o.score : -*o.score;
}

std::vector<double> EvalContext::evaluate(std::span<const std::vector<double>> points) {
  const std::size_t batch_id = batches_++;

  // Each accepted point maps either to an earlier log entry or to a slot in
  // the fresh batch.
  struct Slot {
    bool cached;
    std::size_t index;
  };
  std::vector<Slot> slots;
  std::vector<ParamVector> fresh;
  std::map<std::vector<double>, std::size_t> fresh_index;

  for (const auto& raw : points) {
    if (exhausted()) break;
    if (raw.size() != space_.size()) throw NameMismatch("point has the wrong dimension");
    std::vector<double> x = raw;
    clamp_values(space_, x);
    if (options_.dedupe) {
      if (auto it = seen_.find(x); it != seen_.end()) {
        ++cache_hits_;
        slots.push_back({true, it->second});
        continue;
      }
      if (auto it = fresh_index.find(x); it != fresh_index.end()) {
        ++cache_hits_;
        slots.push_back({false, it->second});
        continue;
      }
    }
    if (fresh.size() == remaining()) break;
    if (options_.dedupe) fresh_index.emplace(x, fresh.size());
    slots.push_back({false, fresh.size()});
    fresh.push_back(space_.make_point(std::move(x)));
  }

  std::vector<Outcome> outcomes;
  if (!fresh.empty()) {
    BatchRequest request{std::move(fresh), batch_id};
    outcomes = evaluate_batch(objective_, request, options_.parallelism).outcomes;
    if (outcomes.size() != request.candidates.size()) {
      throw Error("objective returned " + std::to_string(outcomes.size()) + " outcomes for " +
                  std::to_string(request.candidates.size()) + " candidates");
    }
    const std::size_t base = log_.size();
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      TrialRecord rec;
      rec.params = std::move(request.candidates[i]);
      rec.score = outcomes[i].score;
      rec.error = outcomes[i].error;
      rec.eval_index = base + i;
      rec.batch_id = batch_id;
      const double loss = loss_of(outcomes[i]);
      if (loss < best_loss_) {
        best_loss_ = loss;
        best_index_ = rec.eval_index;
      }
      if (options_.dedupe) seen_.emplace(rec.params.values(), rec.eval_index);
      log_.push_back(std::move(rec));
    }
    for (auto& s : slots) {
      if (!s.cached) s.index += base;
    }
  }

  std::vector<double> losses;
  losses.reserve(slots.size());
  for (const auto& s : slots) {
    const auto& rec = log_[s.index];
    losses.push_back(rec.ok() ? (direction_ == Direction::minimize ? *rec.score : -*rec.score) : kInf);
  }
  return losses;
}

std::optional<double> EvalContext::evaluate(const std::vector<double>& point) {
  auto losses = evaluate(std::span<const std::vector<double>>(&point, 1));
  if (losses.empty()) return std::nullopt;
  return losses.front();
}

OptimizationResult EvalContext::finish(std::string solver_name, StopReason reason) && {
  if (!best_index_) {
    throw BudgetExhaustedWithNoSuccess("all " + std::to_string(log_.size()) +
                                       " evaluations failed");
  }
  OptimizationResult r;
  r.best_params = log_[*best_index_].params;
  r.best_score = *log_[*best_index_].score;
  r.num_evals = log_.size();
  r.call_log = std::move(log_);
  r.solver_name = std::move(solver_name);
  r.wall_time = std::chrono::steady_clock::now() - started_;
  r.stop_reason = reason;
  return r;
}

OptimizationResult optimize(const SolverConfig& config, Objective& objective,
                            const SearchSpace& space, Direction direction, Budget budget,
                            const RunOptions& options) {
  EvalContext ctx(objective, space, direction, budget, options);
  StopReason reason;
  if (space.free_dims().empty()) {
    // Every dimension is a constant: there is exactly one feasible point.
    ctx.evaluate(space.center());
    reason = StopReason::converged;
  } else {
    reason = detail::run_solver(config, ctx);
  }
  return std::move(ctx).finish(config.name(), reason);
}

OptimizationResult maximize(Objective& objective, const SearchSpace& space, Budget budget,
                            const std::optional<SolverConfig>& solver, const RunOptions& options) {
  return optimize(solver.value_or(select_default_solver()), objective, space, Direction::maximize,
                  budget, options);
}

OptimizationResult minimize(Objective& objective, const SearchSpace& space, Budget budget,
                            const std::optional<SolverConfig>& solver, const RunOptions& options) {
  return optimize(solver.value_or(select_default_solver()), objective, space, Direction::minimize,
                  budget, options);
}

OptimizationResult maximize(const ObjectiveFn& f, const SearchSpace& space, Budget budget,
                            const std::optional<SolverConfig>& solver, const RunOptions& options) {
  FunctionObjective objective(f);
  return maximize(objective, space, budget, solver, options);
}

OptimizationResult minimize(const ObjectiveFn& f, const SearchSpace& space, Budget budget,
                            const std::optional<SolverConfig>& solver, const RunOptions& options) {
  FunctionObjective objective(f);
  return minimize(objective, space, budget, solver, options);
}

}  // namespace tunekit
