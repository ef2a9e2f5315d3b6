#include "tunekit/search_space.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "tunekit/errors.hpp"

namespace tunekit {

ParamVector::ParamVector(std::vector<std::string> names, std::vector<double> values)
    : names_(std::move(names)), values_(std::move(values)) {
  if (names_.size() != values_.size()) {
    throw NameMismatch("param vector has " + std::to_string(names_.size()) + " names but " +
                       std::to_string(values_.size()) + " values");
  }
}

std::optional<double> ParamVector::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return values_[i];
  }
  return std::nullopt;
}

double ParamVector::at(std::string_view name) const {
  if (auto v = find(name)) return *v;
  throw NameMismatch("no hyperparameter named '" + std::string(name) + "'");
}

std::map<std::string, double> ParamVector::to_map() const {
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < names_.size(); ++i) out.emplace(names_[i], values_[i]);
  return out;
}

SearchSpace::SearchSpace(std::vector<Dimension> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw EmptySpace("search space needs at least one dimension");
  std::sort(dims_.begin(), dims_.end(),
            [](const Dimension& a, const Dimension& b) { return a.name < b.name; });
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto& d = dims_[i];
    if (d.name.empty()) throw InvalidBound("dimension name must be nonempty");
    if (i > 0 && dims_[i - 1].name == d.name) {
      throw InvalidBound("duplicate dimension name '" + d.name + "'");
    }
    if (!std::isfinite(d.lower) || !std::isfinite(d.upper)) {
      throw InvalidBound("bounds of '" + d.name + "' must be finite");
    }
    if (d.lower > d.upper) {
      throw InvalidBound("lower bound exceeds upper bound for '" + d.name + "'");
    }
    names_.push_back(d.name);
    if (!d.degenerate()) free_.push_back(i);
  }
}

std::vector<double> SearchSpace::center() const {
  std::vector<double> c(dims_.size());
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    c[i] = dims_[i].degenerate() ? dims_[i].lower : 0.5 * (dims_[i].lower + dims_[i].upper);
  }
  return c;
}

ParamVector SearchSpace::make_point(std::vector<double> values) const {
  return ParamVector(names_, std::move(values));
}

void SearchSpace::check_names(const ParamVector& p) const {
  if (p.names() == names_) return;
  std::set<std::string> expected(names_.begin(), names_.end());
  std::set<std::string> got(p.names().begin(), p.names().end());
  if (expected != got || got.size() != p.size()) {
    throw NameMismatch("hyperparameter names do not match the search space");
  }
}

SearchSpace make_space(const std::map<std::string, std::pair<double, double>>& bounds) {
  std::vector<Dimension> dims;
  dims.reserve(bounds.size());
  for (const auto& [name, b] : bounds) dims.push_back({name, b.first, b.second});
  return SearchSpace(std::move(dims));
}

bool contains(const SearchSpace& space, const ParamVector& p) {
  space.check_names(p);
  for (const auto& d : space.dims()) {
    const double v = p.at(d.name);
    if (!(v >= d.lower && v <= d.upper)) return false;
  }
  return true;
}

void clamp_values(const SearchSpace& space, std::span<double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::clamp(values[i], space[i].lower, space[i].upper);
  }
}

ParamVector clamp(const SearchSpace& space, const ParamVector& p) {
  space.check_names(p);
  std::vector<double> values;
  values.reserve(space.size());
  for (const auto& d : space.dims()) values.push_back(std::clamp(p.at(d.name), d.lower, d.upper));
  return space.make_point(std::move(values));
}

nlohmann::json to_json(const SearchSpace& space) {
  auto j = nlohmann::json::object();
  for (const auto& d : space.dims()) j[d.name] = {d.lower, d.upper};
  return j;
}

SearchSpace space_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidBound("space must be a JSON object of name -> [lower, upper]");
  std::vector<Dimension> dims;
  for (const auto& [name, b] : j.items()) {
    if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) {
      throw InvalidBound("bounds of '" + name + "' must be a [lower, upper] pair of numbers");
    }
    dims.push_back({name, b[0].get<double>(), b[1].get<double>()});
  }
  return SearchSpace(std::move(dims));
}

nlohmann::json to_json(const ParamVector& p) {
  auto j = nlohmann::json::object();
  for (std::size_t i = 0; i < p.size(); ++i) j[p.names()[i]] = p.values()[i];
  return j;
}

ParamVector params_from_json(const SearchSpace& space, const nlohmann::json& j) {
  if (!j.is_object()) throw NameMismatch("param vector must be a JSON object");
  if (j.size() != space.size()) throw NameMismatch("param object has the wrong number of entries");
  std::vector<double> values;
  values.reserve(space.size());
  for (const auto& d : space.dims()) {
    auto it = j.find(d.name);
    if (it == j.end()) throw NameMismatch("param object lacks '" + d.name + "'");
    if (!it->is_number()) throw NameMismatch("value of '" + d.name + "' is not a number");
    values.push_back(it->get<double>());
  }
  return space.make_point(std::move(values));
}

}  // namespace tunekit
