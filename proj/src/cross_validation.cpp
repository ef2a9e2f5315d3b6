#include "tunekit/cross_validation.hpp"

#include <algorithm>
#include <exception>
#include <numeric>

#include <nlohmann/json.hpp>

#include "tunekit/batch_eval.hpp"
#include "tunekit/errors.hpp"
#include "tunekit/rng.hpp"

namespace tunekit {

namespace {

constexpr std::size_t kUnassigned = static_cast<std::size_t>(-1);

void validate(std::size_t n, const GroupingSpec& g) {
  std::vector<int> owner(n, 0);  // 0 free, 1 stratum, 2 cluster
  const auto mark = [&](const std::vector<IndexSet>& sets, int tag, const char* what) {
    for (const auto& set : sets) {
      for (auto i : set) {
        if (i >= n) {
          throw IndexOutOfRange(std::string(what) + " index " + std::to_string(i) +
                                " is outside [0, " + std::to_string(n) + ")");
        }
        if (owner[i] == tag) {
          throw OverlappingGroups("index " + std::to_string(i) + " appears in more than one " + what);
        }
        if (owner[i] != 0) {
          throw OverlappingGroups("index " + std::to_string(i) + " is in both a stratum and a cluster");
        }
        owner[i] = tag;
      }
    }
  };
  mark(g.strata, 1, "stratum");
  mark(g.clusters, 2, "cluster");
}

// Folds sorted by (current size, seeded rank).
std::vector<std::size_t> folds_by_size(const std::vector<std::size_t>& sizes,
                                       const std::vector<std::size_t>& rank) {
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sizes[a] != sizes[b] ? sizes[a] < sizes[b] : rank[a] < rank[b];
  });
  return order;
}

std::size_t smallest_fold(const std::vector<std::size_t>& sizes, const std::vector<std::size_t>& rank) {
  std::size_t best = 0;
  for (std::size_t f = 1; f < sizes.size(); ++f) {
    if (sizes[f] < sizes[best] || (sizes[f] == sizes[best] && rank[f] < rank[best])) best = f;
  }
  return best;
}

}  // namespace

IndexSet FoldPlan::test_indices(std::size_t iteration, std::size_t fold) const {
  IndexSet out;
  const auto& a = assignments.at(iteration);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == fold) out.push_back(i);
  }
  return out;
}

IndexSet FoldPlan::train_indices(std::size_t iteration, std::size_t fold) const {
  IndexSet out;
  const auto& a = assignments.at(iteration);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != fold) out.push_back(i);
  }
  return out;
}

FoldPlan generate_folds(std::size_t n, std::size_t k, std::size_t r, const GroupingSpec& grouping,
                        std::uint64_t seed) {
  if (r < 1) throw InvalidFoldCount("number of iterations must be at least 1");
  if (k < 2 || k > n) {
    throw InvalidFoldCount("need 2 <= k <= n, got k=" + std::to_string(k) + ", n=" + std::to_string(n));
  }
  validate(n, grouping);

  std::vector<const IndexSet*> clusters;
  std::size_t clustered = 0;
  for (const auto& c : grouping.clusters) {
    if (c.empty()) continue;
    clusters.push_back(&c);
    clustered += c.size();
  }
  const std::size_t units = clusters.size() + (n - clustered);
  if (k > units) {
    throw InvalidFoldCount("k=" + std::to_string(k) + " exceeds the " + std::to_string(units) +
                           " independent units left after clustering");
  }
  std::stable_sort(clusters.begin(), clusters.end(),
                   [](const IndexSet* a, const IndexSet* b) { return a->size() > b->size(); });

  FoldPlan plan{n, k, r, {}};
  for (std::size_t it = 0; it < r; ++it) {
    Rng rng = make_rng(seed, it);
    std::vector<std::size_t> rank(k);
    std::iota(rank.begin(), rank.end(), 0);
    std::shuffle(rank.begin(), rank.end(), rng);

    std::vector<std::size_t> fold_of(n, kUnassigned);
    std::vector<std::size_t> sizes(k, 0);

    for (const auto* c : clusters) {
      const auto f = smallest_fold(sizes, rank);
      for (auto i : *c) fold_of[i] = f;
      sizes[f] += c->size();
    }

    for (const auto& stratum : grouping.strata) {
      IndexSet members = stratum;
      std::shuffle(members.begin(), members.end(), rng);
      const auto order = folds_by_size(sizes, rank);
      for (std::size_t j = 0; j < members.size(); ++j) {
        const auto f = order[j % k];
        fold_of[members[j]] = f;
        ++sizes[f];
      }
    }

    IndexSet rest;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] == kUnassigned) rest.push_back(i);
    }
    std::shuffle(rest.begin(), rest.end(), rng);
    for (auto i : rest) {
      const auto f = smallest_fold(sizes, rank);
      fold_of[i] = f;
      ++sizes[f];
    }
    plan.assignments.push_back(std::move(fold_of));
  }
  return plan;
}

double mean_aggregator(std::span<const double> scores) {
  if (scores.empty()) throw EmptyInput("cannot aggregate zero scores");
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

double cross_validated_score(const FoldScorer& inner, const FoldPlan& plan,
                             const Aggregator& aggregator, std::size_t parallelism) {
  const std::size_t cells = plan.num_iter * plan.num_folds;
  std::vector<double> scores(cells);
  std::vector<std::exception_ptr> errors(cells);
  detail::parallel_for(cells, std::max<std::size_t>(parallelism, 1), [&](std::size_t cell) {
    const std::size_t it = cell / plan.num_folds;
    const std::size_t fold = cell % plan.num_folds;
    try {
      const auto train = plan.train_indices(it, fold);
      const auto test = plan.test_indices(it, fold);
      scores[cell] = inner(train, test);
    } catch (...) {
      errors[cell] = std::current_exception();
    }
  });
  for (std::size_t cell = 0; cell < cells; ++cell) {
    if (!errors[cell]) continue;
    const std::size_t it = cell / plan.num_folds;
    const std::size_t fold = cell % plan.num_folds;
    try {
      std::rethrow_exception(errors[cell]);
    } catch (const std::exception& e) {
      throw FoldFailure(it, fold, e.what());
    } catch (...) {
      throw FoldFailure(it, fold, "unknown exception");
    }
  }
  return aggregator(scores);
}

CrossValidatedObjective::CrossValidatedObjective(Learner learner, FoldPlan plan,
                                                 Aggregator aggregator, bool concurrent_safe)
    : learner_(std::move(learner)),
      plan_(std::move(plan)),
      aggregator_(std::move(aggregator)),
      concurrent_safe_(concurrent_safe) {}

double CrossValidatedObjective::evaluate(const ParamVector& params) {
  return cross_validated_score(
      [&](std::span<const std::size_t> train, std::span<const std::size_t> test) {
        return learner_(train, test, params);
      },
      plan_, aggregator_);
}

nlohmann::json to_json(const FoldPlan& plan) {
  return {{"n", plan.num_instances},
          {"k", plan.num_folds},
          {"r", plan.num_iter},
          {"assignments", plan.assignments}};
}

FoldPlan fold_plan_from_json(const nlohmann::json& j) {
  FoldPlan plan;
  try {
    plan.num_instances = j.at("n").get<std::size_t>();
    plan.num_folds = j.at("k").get<std::size_t>();
    plan.num_iter = j.at("r").get<std::size_t>();
    plan.assignments = j.at("assignments").get<std::vector<std::vector<std::size_t>>>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidFoldCount(std::string("malformed fold plan: ") + e.what());
  }
  if (plan.assignments.size() != plan.num_iter) throw InvalidFoldCount("fold plan has the wrong number of iterations");
  for (const auto& row : plan.assignments) {
    if (row.size() != plan.num_instances) throw InvalidFoldCount("fold plan row has the wrong length");
    for (auto f : row) {
      if (f >= plan.num_folds) throw IndexOutOfRange("fold index out of range in fold plan");
    }
  }
  return plan;
}

}  // namespace tunekit
