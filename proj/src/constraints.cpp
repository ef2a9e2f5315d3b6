#include "tunekit/constraints.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "tunekit/batch_eval.hpp"
#include "tunekit/errors.hpp"

namespace tunekit {

std::string to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::lower_open: return "lower_open";
    case ConstraintKind::lower_closed: return "lower_closed";
    case ConstraintKind::upper_open: return "upper_open";
    case ConstraintKind::upper_closed: return "upper_closed";
    case ConstraintKind::range: return "range";
  }
  return "unknown";
}

ConstraintKind constraint_kind_from_string(const std::string& s) {
  for (auto k : {ConstraintKind::lower_open, ConstraintKind::lower_closed, ConstraintKind::upper_open,
                 ConstraintKind::upper_closed, ConstraintKind::range}) {
    if (to_string(k) == s) return k;
  }
  throw InvalidConstraint("unknown constraint kind '" + s + "'");
}

Constraint::Constraint(ConstraintKind kind, std::string dim, double threshold)
    : kind_(kind), dim_(std::move(dim)), bounds_{threshold} {
  if (kind_ == ConstraintKind::range) throw InvalidConstraint("range constraints need two bounds");
  if (std::isnan(threshold)) throw InvalidConstraint("constraint threshold is NaN");
}

Constraint::Constraint(std::string dim, double lower, double upper)
    : kind_(ConstraintKind::range), dim_(std::move(dim)), bounds_{lower, upper} {
  if (!(lower < upper)) throw InvalidConstraint("range constraint on '" + dim_ + "' needs lower < upper");
}

bool Constraint::satisfied_by(double v) const noexcept {
  switch (kind_) {
    case ConstraintKind::lower_open: return v > bounds_[0];
    case ConstraintKind::lower_closed: return v >= bounds_[0];
    case ConstraintKind::upper_open: return v < bounds_[0];
    case ConstraintKind::upper_closed: return v <= bounds_[0];
    case ConstraintKind::range: return v > bounds_[0] && v < bounds_[1];
  }
  return false;
}

std::vector<Constraint> check(const std::vector<Constraint>& constraints, const ParamVector& p) {
  std::vector<Constraint> violated;
  for (const auto& c : constraints) {
    const auto v = p.find(c.dim());
    if (!v) throw UnknownDimension("constraint refers to unknown dimension '" + c.dim() + "'");
    if (!c.satisfied_by(*v)) violated.push_back(c);
  }
  return violated;
}

ConstrainedObjective::ConstrainedObjective(std::shared_ptr<Objective> inner,
                                           std::vector<Constraint> constraints,
                                           double default_value)
    : inner_(std::move(inner)), constraints_(std::move(constraints)), default_value_(default_value) {
  if (!inner_) throw InvalidConstraint("constrained objective needs an inner objective");
}

double ConstrainedObjective::evaluate(const ParamVector& params) {
  if (!check(constraints_, params).empty()) return default_value_;
  ++inner_calls_;
  return inner_->evaluate(params);
}

std::vector<Outcome> ConstrainedObjective::evaluate_batch(std::span<const ParamVector> candidates,
                                                          std::size_t parallelism) {
  std::vector<Outcome> out(candidates.size());
  std::vector<ParamVector> feasible;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    // check() throws UnknownDimension here, outside any per-element isolation.
    if (check(constraints_, candidates[i]).empty()) {
      feasible.push_back(candidates[i]);
      where.push_back(i);
    } else {
      out[i] = Outcome::success(default_value_);
    }
  }
  if (!feasible.empty()) {
    inner_calls_ += feasible.size();
    auto inner = inner_->evaluate_batch(feasible, parallelism);
    for (std::size_t k = 0; k < where.size(); ++k) out[where[k]] = std::move(inner[k]);
  }
  return out;
}

std::shared_ptr<ConstrainedObjective> wrap_constraints(std::shared_ptr<Objective> f,
                                                       std::vector<Constraint> constraints,
                                                       double default_value) {
  return std::make_shared<ConstrainedObjective>(std::move(f), std::move(constraints), default_value);
}

nlohmann::json to_json(const std::vector<Constraint>& constraints) {
  auto j = nlohmann::json::array();
  for (const auto& c : constraints) {
    j.push_back({{"kind", to_string(c.kind())}, {"dim", c.dim()}, {"bounds", c.bounds()}});
  }
  return j;
}

std::vector<Constraint> constraints_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw InvalidConstraint("constraints must be a JSON array");
  std::vector<Constraint> out;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("kind") || !e.contains("dim") || !e.contains("bounds") ||
        !e["kind"].is_string() || !e["dim"].is_string() || !e["bounds"].is_array()) {
      throw InvalidConstraint("constraint needs string 'kind', string 'dim' and array 'bounds'");
    }
    const auto kind = constraint_kind_from_string(e["kind"].get<std::string>());
    const auto& b = e["bounds"];
    for (const auto& v : b) {
      if (!v.is_number()) throw InvalidConstraint("constraint bounds must be numbers");
    }
    const auto dim = e["dim"].get<std::string>();
    if (kind == ConstraintKind::range) {
      if (b.size() != 2) throw InvalidConstraint("range constraint needs two bounds");
      out.emplace_back(dim, b[0].get<double>(), b[1].get<double>());
    } else {
      if (b.size() != 1) throw InvalidConstraint(to_string(kind) + " constraint needs one bound");
      out.emplace_back(kind, dim, b[0].get<double>());
    }
  }
  return out;
}

}  // namespace tunekit
