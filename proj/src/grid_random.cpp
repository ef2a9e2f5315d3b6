#include <algorithm>

#include "solvers_internal.hpp"
#include "tunekit/errors.hpp"
#include "tunekit/solvers.hpp"

namespace tunekit {

namespace {

std::vector<double> linspace(const Dimension& d, std::size_t count) {
  if (d.degenerate()) return {d.lower};
  if (count == 1) return {0.5 * (d.lower + d.upper)};
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    v[i] = d.lower + d.width() * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  v.back() = d.upper;
  return v;
}

std::size_t grid_size(const SearchSpace& space, const std::vector<std::size_t>& points) {
  std::size_t total = 1;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const std::size_t p = space[i].degenerate() ? 1 : points[i];
    if (p != 0 && total > std::numeric_limits<std::size_t>::max() / p) {
      return std::numeric_limits<std::size_t>::max();
    }
    total *= p;
  }
  return total;
}

void run_batches(EvalContext& ctx, std::vector<std::vector<double>> points, std::size_t batch) {
  if (batch == 0) batch = points.size();
  for (std::size_t begin = 0; begin < points.size() && !ctx.exhausted(); begin += batch) {
    const std::size_t end = std::min(points.size(), begin + batch);
    ctx.evaluate(std::span<const std::vector<double>>(points.data() + begin, end - begin));
  }
}

}  // namespace

std::vector<ParamVector> grid_generate(const SearchSpace& space,
                                       const std::vector<std::size_t>& points_per_dim) {
  if (points_per_dim.size() != space.size()) {
    throw InvalidSetting("points_per_dim needs one entry per dimension");
  }
  std::vector<std::vector<double>> axes;
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (points_per_dim[i] == 0) throw InvalidSetting("points_per_dim entries must be positive");
    axes.push_back(linspace(space[i], points_per_dim[i]));
  }
  std::vector<ParamVector> out;
  out.reserve(grid_size(space, points_per_dim));
  std::vector<std::size_t> idx(space.size(), 0);
  while (true) {
    std::vector<double> values(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) values[i] = axes[i][idx[i]];
    out.push_back(space.make_point(std::move(values)));
    // Odometer increment, last dimension fastest.
    std::size_t d = space.size();
    while (d > 0) {
      --d;
      if (++idx[d] < axes[d].size()) break;
      idx[d] = 0;
      if (d == 0) return out;
    }
  }
}

std::size_t default_grid_points(const SearchSpace& space, std::size_t budget) {
  const std::size_t d = space.free_dims().size();
  if (d == 0) return 1;
  std::size_t p = static_cast<std::size_t>(std::pow(static_cast<double>(budget), 1.0 / d));
  const auto power_fits = [&](std::size_t base) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < d; ++i) {
      if (total > budget / base) return false;
      total *= base;
    }
    return total <= budget;
  };
  while (p > 1 && !power_fits(p)) --p;
  while (power_fits(p + 1)) ++p;
  return std::max<std::size_t>(p, 1);
}

std::vector<ParamVector> random_generate(const SearchSpace& space, std::size_t count,
                                         std::uint64_t seed) {
  if (count == 0) throw InvalidSetting("random_generate needs count >= 1");
  Rng rng = make_rng(seed, 0);
  std::vector<std::uniform_real_distribution<double>> dists;
  for (const auto& d : space.dims()) {
    dists.emplace_back(d.lower, d.degenerate() ? d.lower : d.upper);
  }
  std::vector<ParamVector> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    std::vector<double> values(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) {
      values[i] = space[i].degenerate() ? space[i].lower : dists[i](rng);
    }
    out.push_back(space.make_point(std::move(values)));
  }
  return out;
}

namespace detail {

StopReason run_grid(const SolverConfig& config, EvalContext& ctx) {
  const auto& space = ctx.space();
  const std::size_t budget = ctx.remaining();
  std::vector<std::size_t> points(space.size());
  if (config.has("points_per_dim")) {
    auto raw = config.list("points_per_dim");
    if (raw.size() == 1) raw.assign(space.size(), raw.front());
    if (raw.size() != space.size()) {
      throw InvalidSetting("points_per_dim needs one entry or one per dimension");
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] < 1 || raw[i] != std::floor(raw[i])) {
        throw InvalidSetting("points_per_dim entries must be positive integers");
      }
      points[i] = static_cast<std::size_t>(raw[i]);
    }
    if (grid_size(space, points) > budget) {
      throw GridTooLarge("grid of " + std::to_string(grid_size(space, points)) +
                         " points exceeds the budget of " + std::to_string(budget));
    }
  } else {
    points.assign(space.size(), default_grid_points(space, budget));
  }
  std::vector<std::vector<double>> raw_points;
  for (auto& p : grid_generate(space, points)) raw_points.push_back(p.values());
  const std::size_t total = raw_points.size();
  run_batches(ctx, std::move(raw_points), count_setting(config, "batch_size", 0));
  return ctx.num_evals() < total && ctx.exhausted() ? StopReason::budget : StopReason::completed;
}

StopReason run_random(const SolverConfig& config, EvalContext& ctx) {
  std::vector<std::vector<double>> raw_points;
  for (auto& p : random_generate(ctx.space(), ctx.remaining(), derive_seed(ctx.seed(), 1))) {
    raw_points.push_back(p.values());
  }
  run_batches(ctx, std::move(raw_points), count_setting(config, "batch_size", 0));
  return StopReason::budget;
}

}  // namespace detail

}  // namespace tunekit
