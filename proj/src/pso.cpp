#include <algorithm>
#include <limits>

#include "solvers_internal.hpp"
#include "tunekit/errors.hpp"
#include "tunekit/solvers.hpp"

namespace tunekit {

PsoSettings PsoSettings::from(const SolverConfig& config) {
  PsoSettings s;
  s.num_particles = detail::count_setting(config, "num_particles", s.num_particles, 2);
  s.w = config.number("w", s.w);
  s.c1 = config.number("c1", s.c1);
  s.c2 = config.number("c2", s.c2);
  s.vmax_fraction = config.number("vmax_fraction", s.vmax_fraction);
  if (s.c1 < 0 || s.c2 < 0) throw InvalidSetting("pso c1 and c2 must be nonnegative");
  if (s.vmax_fraction <= 0) throw InvalidSetting("pso vmax_fraction must be positive");
  return s;
}

ParticleSwarm::ParticleSwarm(EvalContext& ctx, PsoSettings settings)
    : ctx_(ctx), settings_(settings), rng_(make_rng(ctx.seed(), 2)) {
  for (const auto& d : ctx_.space().dims()) vmax_.push_back(settings_.vmax_fraction * d.width());
  state_.global_best_loss = std::numeric_limits<double>::infinity();
}

std::optional<StopReason> ParticleSwarm::step() {
  const auto& space = ctx_.space();
  const std::size_t dim = space.size();
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::vector<double>> positions;
  if (state_.generation == 0) {
    // A budget smaller than the swarm shrinks the swarm instead of leaving it unevaluated.
    const std::size_t size = std::min(settings_.num_particles, ctx_.remaining());
    for (std::size_t p = 0; p < size; ++p) {
      Particle particle;
      for (std::size_t i = 0; i < dim; ++i) {
        const auto& d = space[i];
        particle.position.push_back(d.lower + d.width() * unit(rng_));
        particle.velocity.push_back(vmax_[i] * (2.0 * unit(rng_) - 1.0));
      }
      clamp_values(space, particle.position);
      particle.best_position = particle.position;
      particle.best_loss = std::numeric_limits<double>::infinity();
      positions.push_back(particle.position);
      state_.particles.push_back(std::move(particle));
    }
  } else {
    if (ctx_.remaining() < state_.particles.size() || ctx_.exhausted()) return StopReason::budget;
    for (auto& particle : state_.particles) {
      for (std::size_t i = 0; i < dim; ++i) {
        const double r1 = unit(rng_);
        const double r2 = unit(rng_);
        double v = settings_.w * particle.velocity[i] +
                   settings_.c1 * r1 * (particle.best_position[i] - particle.position[i]) +
                   settings_.c2 * r2 * (state_.global_best_position[i] - particle.position[i]);
        v = std::clamp(v, -vmax_[i], vmax_[i]);
        particle.velocity[i] = v;
        particle.position[i] += v;
      }
      clamp_values(space, particle.position);
      positions.push_back(particle.position);
    }
  }

  const auto losses = ctx_.evaluate(positions);
  for (std::size_t p = 0; p < losses.size(); ++p) {
    auto& particle = state_.particles[p];
    if (losses[p] < particle.best_loss) {
      particle.best_loss = losses[p];
      particle.best_position = particle.position;
    }
  }
  // Global best updated after the whole generation (synchronous swarm); the
  // earliest particle wins ties.
  for (const auto& particle : state_.particles) {
    if (particle.best_loss < state_.global_best_loss || state_.global_best_position.empty()) {
      state_.global_best_loss = particle.best_loss;
      state_.global_best_position = particle.best_position;
    }
  }
  ++state_.generation;
  if (losses.size() < positions.size()) return StopReason::budget;
  if (ctx_.remaining() < state_.particles.size() || ctx_.exhausted()) return StopReason::budget;
  return std::nullopt;
}

}  // namespace tunekit
