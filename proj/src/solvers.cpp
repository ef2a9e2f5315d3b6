#include <cmath>

#include "solvers_internal.hpp"
#include "tunekit/errors.hpp"
#include "tunekit/solvers.hpp"

namespace tunekit::detail {

std::size_t count_setting(const SolverConfig& config, const std::string& key, std::size_t fallback,
                          std::size_t minimum) {
  if (!config.has(key)) return fallback;
  const double v = config.number(key, 0.0);
  if (v != std::floor(v) || v < static_cast<double>(minimum) || v > 1e12) {
    throw InvalidSetting("setting '" + key + "' must be an integer >= " + std::to_string(minimum));
  }
  return static_cast<std::size_t>(v);
}

std::vector<double> start_point(const SearchSpace& space,
                                const std::optional<std::vector<double>>& start) {
  if (!start) return space.center();
  if (start->size() != space.size()) {
    throw InvalidSetting("start has " + std::to_string(start->size()) + " values for a " +
                         std::to_string(space.size()) + "-dimensional space");
  }
  std::vector<double> x = *start;
  clamp_values(space, x);
  return x;
}

StopReason run_solver(const SolverConfig& config, EvalContext& ctx) {
  const auto& name = config.name();
  if (name == "grid") return run_grid(config, ctx);
  if (name == "random") return run_random(config, ctx);

  const auto drive = [](auto& solver) {
    while (true) {
      if (auto stop = solver.step()) return *stop;
    }
  };
  if (name == "nelder-mead") {
    NelderMead solver(ctx, NelderMeadSettings::from(config));
    return drive(solver);
  }
  if (name == "pso") {
    ParticleSwarm solver(ctx, PsoSettings::from(config));
    return drive(solver);
  }
  if (name == "cmaes") {
    Cmaes solver(ctx, CmaesSettings::from(config));
    return drive(solver);
  }
  throw SolverUnknown("unknown solver '" + name + "'");
}

}  // namespace tunekit::detail
