#pragma once

#include <atomic>
#include <string>

#include "tunekit/objective.hpp"

namespace tunekit {

/// Scores a point by running a shell command once: the parameters go to its
/// stdin as one JSON object line, and the first stdout line must hold a
/// number or {"error": "..."}. A nonzero exit status counts as a failure.
class ExecObjective : public Objective {
 public:
  explicit ExecObjective(std::string command) : command_(std::move(command)) {}

  double evaluate(const ParamVector& params) override;
  bool concurrent_safe() const override { return true; }

  std::size_t invocations() const noexcept { return invocations_.load(); }

 private:
  std::string command_;
  std::atomic<std::size_t> invocations_{0};
};

}  // namespace tunekit
