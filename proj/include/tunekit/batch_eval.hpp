#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "tunekit/objective.hpp"

namespace tunekit {

struct BatchRequest {
  std::vector<ParamVector> candidates;
  std::size_t batch_id = 0;
};

struct BatchResult {
  std::vector<Outcome> outcomes;

  friend bool operator==(const BatchResult&, const BatchResult&) = default;
};

/// Scores every candidate of the request. Uses up to `parallelism` threads
/// when the objective is concurrent-safe, sequential otherwise. The result
/// does not depend on the thread count; an exception or non-finite score
/// turns into a failed outcome for that element only.
BatchResult evaluate_batch(Objective& f, const BatchRequest& request, std::size_t parallelism);

/// Per-element evaluation used by the default Objective::evaluate_batch.
std::vector<Outcome> evaluate_each(Objective& f, std::span<const ParamVector> candidates,
                                   std::size_t parallelism);

namespace detail {

/// Runs body(i) for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace detail

}  // namespace tunekit
