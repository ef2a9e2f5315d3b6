#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "tunekit/optimize.hpp"
#include "tunekit/rng.hpp"

namespace tunekit {

// ---------------------------------------------------------------- grid / random

/// Cartesian product of per-dimension linspaces (endpoints included; a single
/// point is the midpoint). The first dimension varies slowest. Degenerate
/// dimensions always contribute their one value.
std::vector<ParamVector> grid_generate(const SearchSpace& space,
                                       const std::vector<std::size_t>& points_per_dim);

/// Largest p with p^d <= budget, where d counts the non-degenerate dimensions.
std::size_t default_grid_points(const SearchSpace& space, std::size_t budget);

/// i.i.d. uniform samples over the box.
std::vector<ParamVector> random_generate(const SearchSpace& space, std::size_t count,
                                         std::uint64_t seed);

// ---------------------------------------------------------------- Nelder-Mead

struct NelderMeadSettings {
  std::optional<std::vector<double>> start;  ///< defaults to the box center
  double tol = 1e-8;                          ///< simplex diameter stop
  double step_fraction = 0.05;                ///< initial offset, fraction of box width
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;

  static NelderMeadSettings from(const SolverConfig& config);
};

struct SimplexVertex {
  ParamVector params;
  double loss;  ///< minimization-sense score
};

/// Vertices sorted best first.
struct SimplexState {
  std::vector<SimplexVertex> vertices;
  std::size_t iteration = 0;
  std::size_t restarts = 0;
};

/// Nelder-Mead over the non-degenerate dimensions. Candidates are clamped to
/// the box before evaluation. When clamping flattens the simplex before the
/// diameter test fires, it is rebuilt around the best vertex at its current
/// size.
class NelderMead {
 public:
  NelderMead(EvalContext& ctx, NelderMeadSettings settings);

  /// One iteration; the first call builds and scores the initial simplex.
  /// Returns a stop reason once the run is over.
  std::optional<StopReason> step();

  SimplexState state() const;
  /// Largest max-norm distance from the best vertex to any other.
  double diameter() const;

 private:
  using Point = Eigen::VectorXd;  // free coordinates only
  struct Vertex {
    Point x;
    double loss;
  };

  std::vector<double> full(const Point& x) const;
  std::optional<double> eval(const Point& x);
  Point clamp_free(Point x) const;
  void sort();
  bool flat() const;
  std::optional<StopReason> build_simplex(const Point& origin, const Point& offsets);

  EvalContext& ctx_;
  NelderMeadSettings settings_;
  std::vector<std::size_t> free_;
  Point lower_, upper_, width_;
  std::vector<Vertex> vertices_;
  std::size_t iteration_ = 0;
  std::size_t restarts_ = 0;
  bool started_ = false;
};

// ---------------------------------------------------------------- particle swarm

struct PsoSettings {
  std::size_t num_particles = 20;
  double w = 0.729;
  double c1 = 1.49445;
  double c2 = 1.49445;
  double vmax_fraction = 0.5;  ///< velocity clamp, fraction of box width

  static PsoSettings from(const SolverConfig& config);
};

struct Particle {
  std::vector<double> position;
  std::vector<double> velocity;
  std::vector<double> best_position;
  double best_loss;
};

struct PsoState {
  std::vector<Particle> particles;
  std::vector<double> global_best_position;
  double global_best_loss;
  std::size_t generation = 0;
};

/// Global-best particle swarm. One step is one generation of
/// min(num_particles, budget) evaluations; the run lasts
/// floor(budget / swarm size) generations.
class ParticleSwarm {
 public:
  ParticleSwarm(EvalContext& ctx, PsoSettings settings);

  std::optional<StopReason> step();
  const PsoState& state() const noexcept { return state_; }

 private:
  EvalContext& ctx_;
  PsoSettings settings_;
  std::vector<double> vmax_;
  Rng rng_;
  PsoState state_;
};

// ---------------------------------------------------------------- CMA-ES

struct CmaesSettings {
  std::optional<double> sigma0;              ///< defaults to 0.3 x mean box width
  std::optional<std::size_t> lambda;         ///< defaults to 4 + floor(3 ln n)
  std::optional<std::vector<double>> start;  ///< defaults to the box center
  double tolx = 1e-12;

  static CmaesSettings from(const SolverConfig& config);
};

/// Internal state in the solver's coordinates: non-degenerate dimensions only,
/// each divided by (its width / mean width), so cubic boxes keep raw units.
struct CmaesState {
  Eigen::VectorXd mean;
  double sigma;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd path_sigma;
  Eigen::VectorXd path_c;
  std::size_t generation = 0;
};

/// (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates and
/// cumulative step-size adaptation. Samples are clamped to the box before
/// evaluation and the clamped points drive the update.
class Cmaes {
 public:
  Cmaes(EvalContext& ctx, CmaesSettings settings);

  std::optional<StopReason> step();
  const CmaesState& state() const noexcept { return state_; }
  std::size_t lambda() const noexcept { return lambda_; }
  /// Eigenvalues of the covariance after the last decomposition.
  const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }

 private:
  std::vector<double> full(const Eigen::VectorXd& u) const;
  void decompose();

  EvalContext& ctx_;
  CmaesSettings settings_;
  std::vector<std::size_t> free_;
  Eigen::VectorXd scale_, lower_, upper_;
  std::size_t n_, lambda_, mu_;
  Eigen::VectorXd weights_;
  double mueff_, cc_, cs_, c1_, cmu_, damps_, chin_;
  Eigen::MatrixXd basis_;
  Eigen::VectorXd eigenvalues_;
  Rng rng_;
  CmaesState state_;
};

}  // namespace tunekit
