#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tunekit/objective.hpp"

namespace tunekit {

using IndexSet = std::vector<std::size_t>;

/// Strata are spread evenly over folds; each cluster lands in a single fold.
/// Sets within each list must be disjoint, and no index may be both
/// stratified and clustered.
struct GroupingSpec {
  std::vector<IndexSet> strata;
  std::vector<IndexSet> clusters;
};

/// Fold assignment for r iterations of k-fold cross-validation over n instances.
struct FoldPlan {
  std::size_t num_instances = 0;
  std::size_t num_folds = 0;
  std::size_t num_iter = 0;
  /// assignments[iteration][instance] is a fold index in [0, num_folds).
  std::vector<std::vector<std::size_t>> assignments;

  IndexSet test_indices(std::size_t iteration, std::size_t fold) const;
  IndexSet train_indices(std::size_t iteration, std::size_t fold) const;

  friend bool operator==(const FoldPlan&, const FoldPlan&) = default;
};

/// Builds a plan. Per iteration: clusters go largest first to the currently
/// smallest fold, stratum members are dealt round-robin starting at the
/// smallest folds, and the remaining instances fill the smallest folds. Ties
/// between folds are broken by a seeded permutation, and each iteration uses
/// its own substream.
///
/// Throws InvalidFoldCount unless 2 <= k <= number of placement units (clusters
/// count as one unit) and r >= 1; OverlappingGroups; IndexOutOfRange.
FoldPlan generate_folds(std::size_t n, std::size_t k, std::size_t r,
                        const GroupingSpec& grouping = {}, std::uint64_t seed = 0);

using FoldScorer = std::function<double(std::span<const std::size_t> train,
                                        std::span<const std::size_t> test)>;
using Aggregator = std::function<double(std::span<const double>)>;

double mean_aggregator(std::span<const double> scores);

/// Calls inner once per (iteration, fold) with that fold as the test set and
/// aggregates the k*r scores in (iteration, fold) order. A failing fold is
/// rethrown as FoldFailure. With parallelism > 1 cells may run concurrently,
/// so inner must then be thread-safe.
double cross_validated_score(const FoldScorer& inner, const FoldPlan& plan,
                             const Aggregator& aggregator = mean_aggregator,
                             std::size_t parallelism = 1);

/// Objective whose value is the cross-validated score of a learner run with
/// the candidate hyperparameters. Only index sets reach the learner.
class CrossValidatedObjective : public Objective {
 public:
  using Learner = std::function<double(std::span<const std::size_t> train,
                                       std::span<const std::size_t> test, const ParamVector&)>;

  CrossValidatedObjective(Learner learner, FoldPlan plan, Aggregator aggregator = mean_aggregator,
                          bool concurrent_safe = false);

  double evaluate(const ParamVector& params) override;
  bool concurrent_safe() const override { return concurrent_safe_; }
  const FoldPlan& plan() const noexcept { return plan_; }

 private:
  Learner learner_;
  FoldPlan plan_;
  Aggregator aggregator_;
  bool concurrent_safe_;
};

/// {"n": ..., "k": ..., "r": ..., "assignments": [[...], ...]}
nlohmann::json to_json(const FoldPlan& plan);
FoldPlan fold_plan_from_json(const nlohmann::json& j);

}  // namespace tunekit
