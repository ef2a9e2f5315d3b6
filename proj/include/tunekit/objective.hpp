#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tunekit/search_space.hpp"

namespace tunekit {

/// Result of one objective evaluation: a finite score or a failure message.
struct Outcome {
  std::optional<double> score;
  std::string error;

  static Outcome success(double value);
  static Outcome failure(std::string message);

  bool ok() const noexcept { return score.has_value(); }

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

/// Black-box objective. Implementations either evaluate a single point or
/// override evaluate_batch to handle a whole candidate list at once (for
/// example when the batch is shipped to another process).
class Objective {
 public:
  virtual ~Objective() = default;

  /// Scores one point. Throwing marks the evaluation as failed.
  virtual double evaluate(const ParamVector& params) = 0;

  /// Whether evaluate may be called from several threads at once.
  virtual bool concurrent_safe() const { return false; }

  /// Scores a batch; outcomes[i] belongs to candidates[i]. The default
  /// dispatches to evaluate through evaluate_batch() of batch_eval.hpp.
  virtual std::vector<Outcome> evaluate_batch(std::span<const ParamVector> candidates,
                                              std::size_t parallelism);
};

/// Adapts a callable into an Objective.
class FunctionObjective : public Objective {
 public:
  using Fn = std::function<double(const ParamVector&)>;

  explicit FunctionObjective(Fn fn, bool concurrent_safe = false)
      : fn_(std::move(fn)), concurrent_safe_(concurrent_safe) {}

  double evaluate(const ParamVector& params) override { return fn_(params); }
  bool concurrent_safe() const override { return concurrent_safe_; }

 private:
  Fn fn_;
  bool concurrent_safe_;
};

}  // namespace tunekit
