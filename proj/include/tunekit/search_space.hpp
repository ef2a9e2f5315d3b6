#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace tunekit {

/// One named hyperparameter with closed bounds [lower, upper].
struct Dimension {
  std::string name;
  double lower = 0.0;
  double upper = 0.0;

  double width() const noexcept { return upper - lower; }
  bool degenerate() const noexcept { return lower == upper; }

  friend bool operator==(const Dimension&, const Dimension&) = default;
};

/// A named hyperparameter tuple. Names and order follow the owning SearchSpace.
class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(std::vector<std::string> names, std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// Value by name; throws NameMismatch when absent.
  double at(std::string_view name) const;
  std::optional<double> find(std::string_view name) const;

  std::map<std::string, double> to_map() const;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<double> values_;
};

/// Box-constrained domain of the hyperparameters. Dimensions are kept in
/// lexicographic name order; the value is immutable after construction.
class SearchSpace {
 public:
  /// Validates and sorts. Throws EmptySpace or InvalidBound.
  explicit SearchSpace(std::vector<Dimension> dims);

  std::size_t size() const noexcept { return dims_.size(); }
  const std::vector<Dimension>& dims() const noexcept { return dims_; }
  const Dimension& operator[](std::size_t i) const { return dims_[i]; }
  const std::vector<std::string>& names() const noexcept { return names_; }

  /// Indices of dimensions with lower < upper.
  const std::vector<std::size_t>& free_dims() const noexcept { return free_; }

  std::vector<double> center() const;

  /// Wraps raw values (canonical order) into a ParamVector; values are not checked.
  ParamVector make_point(std::vector<double> values) const;

  /// Throws NameMismatch when p does not carry exactly this space's names.
  void check_names(const ParamVector& p) const;

  friend bool operator==(const SearchSpace&, const SearchSpace&) = default;

 private:
  std::vector<Dimension> dims_;
  std::vector<std::string> names_;
  std::vector<std::size_t> free_;
};

SearchSpace make_space(const std::map<std::string, std::pair<double, double>>& bounds);

bool contains(const SearchSpace& space, const ParamVector& p);
ParamVector clamp(const SearchSpace& space, const ParamVector& p);

/// In-place projection of raw canonical-order values onto the box.
void clamp_values(const SearchSpace& space, std::span<double> values);

struct TrialRecord {
  ParamVector params;
  /// Score in the user's units; empty when the evaluation failed.
  std::optional<double> score;
  std::string error;
  std::size_t eval_index = 0;
  /// Which solver batch (generation/step) produced the candidate.
  std::size_t batch_id = 0;

  bool ok() const noexcept { return score.has_value(); }
};

// JSON: a space is {"name": [lower, upper], ...}; a ParamVector is {"name": value, ...}.
nlohmann::json to_json(const SearchSpace& space);
SearchSpace space_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ParamVector& p);
/// Reads a param object against a space; throws NameMismatch on a different name set.
ParamVector params_from_json(const SearchSpace& space, const nlohmann::json& j);

}  // namespace tunekit
