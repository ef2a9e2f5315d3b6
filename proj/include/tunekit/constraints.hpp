#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tunekit/objective.hpp"

namespace tunekit {

enum class ConstraintKind { lower_open, lower_closed, upper_open, upper_closed, range };

std::string to_string(ConstraintKind kind);
ConstraintKind constraint_kind_from_string(const std::string& s);

/// A bound on one named dimension. `range` is open at both ends.
class Constraint {
 public:
  /// Single-threshold kinds.
  Constraint(ConstraintKind kind, std::string dim, double threshold);
  /// Range kind; requires lower < upper.
  Constraint(std::string dim, double lower, double upper);

  ConstraintKind kind() const noexcept { return kind_; }
  const std::string& dim() const noexcept { return dim_; }
  const std::vector<double>& bounds() const noexcept { return bounds_; }

  bool satisfied_by(double value) const noexcept;

  friend bool operator==(const Constraint&, const Constraint&) = default;

 private:
  ConstraintKind kind_;
  std::string dim_;
  std::vector<double> bounds_;
};

/// Violated constraints in declaration order; throws UnknownDimension when a
/// constraint names a dimension p does not have.
std::vector<Constraint> check(const std::vector<Constraint>& constraints, const ParamVector& p);

/// Objective that answers `default_value` for points violating any constraint
/// and never calls the inner objective on them.
class ConstrainedObjective : public Objective {
 public:
  ConstrainedObjective(std::shared_ptr<Objective> inner, std::vector<Constraint> constraints,
                       double default_value);

  double evaluate(const ParamVector& params) override;
  bool concurrent_safe() const override { return inner_->concurrent_safe(); }
  std::vector<Outcome> evaluate_batch(std::span<const ParamVector> candidates,
                                      std::size_t parallelism) override;

  /// Number of times the inner objective was asked to score a point.
  std::size_t inner_calls() const noexcept { return inner_calls_.load(); }
  const std::vector<Constraint>& constraints() const noexcept { return constraints_; }

 private:
  std::shared_ptr<Objective> inner_;
  std::vector<Constraint> constraints_;
  double default_value_;
  std::atomic<std::size_t> inner_calls_{0};
};

std::shared_ptr<ConstrainedObjective> wrap_constraints(std::shared_ptr<Objective> f,
                                                       std::vector<Constraint> constraints,
                                                       double default_value);

/// [{"kind": ..., "dim": ..., "bounds": [...]}, ...]
nlohmann::json to_json(const std::vector<Constraint>& constraints);
std::vector<Constraint> constraints_from_json(const nlohmann::json& j);

}  // namespace tunekit
