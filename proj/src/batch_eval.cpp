#include "tunekit/batch_eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

namespace tunekit {

Outcome Outcome::success(double value) { return Outcome{value, {}}; }

Outcome Outcome::failure(std::string message) {
  if (message.empty()) message = "evaluation failed";
  return Outcome{std::nullopt, std::move(message)};
}

namespace detail {

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body) {
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            body(i);
          } catch (...) {
            if (!failed.exchange(true)) first_error = std::current_exception();
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

namespace {

Outcome evaluate_one(Objective& f, const ParamVector& p) {
  try {
    const double v = f.evaluate(p);
    if (!std::isfinite(v)) return Outcome::failure("objective returned a non-finite value");
    return Outcome::success(v);
  } catch (const std::exception& e) {
    return Outcome::failure(e.what());
  } catch (...) {
    return Outcome::failure("unknown exception");
  }
}

}  // namespace

std::vector<Outcome> evaluate_each(Objective& f, std::span<const ParamVector> candidates,
                                   std::size_t parallelism) {
  std::vector<Outcome> out(candidates.size());
  const std::size_t threads = f.concurrent_safe() ? std::max<std::size_t>(parallelism, 1) : 1;
  detail::parallel_for(candidates.size(), threads,
                       [&](std::size_t i) { out[i] = evaluate_one(f, candidates[i]); });
  return out;
}

std::vector<Outcome> Objective::evaluate_batch(std::span<const ParamVector> candidates,
                                               std::size_t parallelism) {
  return evaluate_each(*this, candidates, parallelism);
}

BatchResult evaluate_batch(Objective& f, const BatchRequest& request, std::size_t parallelism) {
  BatchResult result{f.evaluate_batch(request.candidates, std::max<std::size_t>(parallelism, 1))};
  // Overrides may hand back non-finite scores; normalize them the same way.
  for (auto& o : result.outcomes) {
    if (o.score && !std::isfinite(*o.score)) o = Outcome::failure("objective returned a non-finite value");
  }
  return result;
}

}  // namespace tunekit
