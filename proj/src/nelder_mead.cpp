#include <algorithm>
#include <cmath>

#include "solvers_internal.hpp"
#include "tunekit/errors.hpp"
#include "tunekit/solvers.hpp"

namespace tunekit {

namespace {

// Normalized simplex volume below which the simplex counts as flat.
constexpr double kFlatVolume = 1e-10;

}  // namespace

NelderMeadSettings NelderMeadSettings::from(const SolverConfig& config) {
  NelderMeadSettings s;
  if (config.has("start")) s.start = config.list("start");
  s.tol = config.number("tol", s.tol);
  s.step_fraction = config.number("step_fraction", s.step_fraction);
  if (s.tol <= 0) throw InvalidSetting("nelder-mead tol must be positive");
  if (s.step_fraction <= 0 || s.step_fraction > 1) {
    throw InvalidSetting("nelder-mead step_fraction must be in (0, 1]");
  }
  return s;
}

NelderMead::NelderMead(EvalContext& ctx, NelderMeadSettings settings)
    : ctx_(ctx), settings_(std::move(settings)), free_(ctx.space().free_dims()) {
  const auto n = static_cast<Eigen::Index>(free_.size());
  lower_.resize(n);
  upper_.resize(n);
  width_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& d = ctx_.space()[free_[i]];
    lower_[i] = d.lower;
    upper_[i] = d.upper;
    width_[i] = d.width();
  }
  // Validate the start eagerly so configuration errors surface before any evaluation.
  detail::start_point(ctx_.space(), settings_.start);
}

std::vector<double> NelderMead::full(const Point& x) const {
  std::vector<double> v = detail::start_point(ctx_.space(), settings_.start);
  for (std::size_t i = 0; i < free_.size(); ++i) v[free_[i]] = x[static_cast<Eigen::Index>(i)];
  return v;
}

NelderMead::Point NelderMead::clamp_free(Point x) const {
  return x.cwiseMax(lower_).cwiseMin(upper_);
}

std::optional<double> NelderMead::eval(const Point& x) { return ctx_.evaluate(full(x)); }

void NelderMead::sort() {
  std::stable_sort(vertices_.begin(), vertices_.end(),
                   [](const Vertex& a, const Vertex& b) { return a.loss < b.loss; });
}

double NelderMead::diameter() const {
  double d = 0.0;
  for (std::size_t i = 1; i < vertices_.size(); ++i) {
    d = std::max(d, (vertices_[i].x - vertices_[0].x).cwiseAbs().maxCoeff());
  }
  return d;
}

bool NelderMead::flat() const {
  const auto n = static_cast<Eigen::Index>(free_.size());
  Eigen::MatrixXd edges(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point e = (vertices_[i + 1].x - vertices_[0].x).cwiseQuotient(width_);
    const double len = e.norm();
    if (len == 0.0) return true;
    edges.row(i) = e / len;
  }
  return std::abs(edges.determinant()) < kFlatVolume;
}

std::optional<StopReason> NelderMead::build_simplex(const Point& origin, const Point& offsets) {
  const auto n = static_cast<Eigen::Index>(free_.size());
  std::vector<std::vector<double>> batch;
  std::vector<Point> points{origin};
  for (Eigen::Index i = 0; i < n; ++i) {
    Point p = origin;
    // Step inward when the offset would leave the box.
    p[i] = origin[i] + offsets[i] <= upper_[i] ? origin[i] + offsets[i] : origin[i] - offsets[i];
    points.push_back(clamp_free(p));
  }
  for (const auto& p : points) batch.push_back(full(p));
  const auto losses = ctx_.evaluate(batch);
  vertices_.clear();
  for (std::size_t i = 0; i < losses.size(); ++i) vertices_.push_back({points[i], losses[i]});
  sort();
  if (losses.size() < points.size()) return StopReason::budget;
  return std::nullopt;
}

std::optional<StopReason> NelderMead::step() {
  if (!started_) {
    started_ = true;
    const auto start = detail::start_point(ctx_.space(), settings_.start);
    Point origin(static_cast<Eigen::Index>(free_.size()));
    for (std::size_t i = 0; i < free_.size(); ++i) origin[static_cast<Eigen::Index>(i)] = start[free_[i]];
    if (auto stop = build_simplex(origin, settings_.step_fraction * width_)) return stop;
    if (diameter() < settings_.tol) return StopReason::converged;
    return std::nullopt;
  }
  if (ctx_.exhausted()) return StopReason::budget;
  if (diameter() < settings_.tol) return StopReason::converged;

  ++iteration_;
  const std::size_t n = free_.size();
  Point centroid = Point::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) centroid += vertices_[i].x;
  centroid /= static_cast<double>(n);

  Vertex& worst = vertices_[n];
  const double best = vertices_[0].loss;
  const double second_worst = vertices_[n - 1].loss;

  const Point xr = clamp_free(centroid + settings_.reflection * (centroid - worst.x));
  const auto fr = eval(xr);
  if (!fr) return StopReason::budget;

  bool accepted = false;
  if (*fr < best) {
    const Point xe = clamp_free(centroid + settings_.expansion * (xr - centroid));
    const auto fe = eval(xe);
    if (!fe) return StopReason::budget;
    worst = *fe < *fr ? Vertex{xe, *fe} : Vertex{xr, *fr};
    accepted = true;
  } else if (*fr < second_worst) {
    worst = {xr, *fr};
    accepted = true;
  } else if (*fr < worst.loss) {
    const Point xc = clamp_free(centroid + settings_.contraction * (xr - centroid));
    const auto fc = eval(xc);
    if (!fc) return StopReason::budget;
    if (*fc <= *fr) {
      worst = {xc, *fc};
      accepted = true;
    }
  } else {
    const Point xc = clamp_free(centroid + settings_.contraction * (worst.x - centroid));
    const auto fc = eval(xc);
    if (!fc) return StopReason::budget;
    if (*fc < worst.loss) {
      worst = {xc, *fc};
      accepted = true;
    }
  }

  if (!accepted) {
    std::vector<Point> shrunk;
    std::vector<std::vector<double>> batch;
    for (std::size_t i = 1; i <= n; ++i) {
      shrunk.push_back(vertices_[0].x + settings_.shrink * (vertices_[i].x - vertices_[0].x));
      batch.push_back(full(shrunk.back()));
    }
    const auto losses = ctx_.evaluate(batch);
    for (std::size_t i = 0; i < losses.size(); ++i) vertices_[i + 1] = {shrunk[i], losses[i]};
    if (losses.size() < n) {
      sort();
      return StopReason::budget;
    }
  }
  sort();

  const double diam = diameter();
  if (diam < settings_.tol) return StopReason::converged;
  if (n > 1 && flat()) {
    ++restarts_;
    Point offsets = Point::Constant(static_cast<Eigen::Index>(n), diam);
    offsets = offsets.cwiseMin(width_);
    const Point origin = vertices_[0].x;
    const double origin_loss = vertices_[0].loss;
    // The best vertex keeps its score; only the new offsets are evaluated.
    std::vector<Point> points;
    std::vector<std::vector<double>> batch;
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      Point p = origin;
      p[k] = origin[k] + offsets[k] <= upper_[k] ? origin[k] + offsets[k] : origin[k] - offsets[k];
      points.push_back(clamp_free(p));
      batch.push_back(full(points.back()));
    }
    const auto losses = ctx_.evaluate(batch);
    vertices_.assign(1, {origin, origin_loss});
    for (std::size_t i = 0; i < losses.size(); ++i) vertices_.push_back({points[i], losses[i]});
    sort();
    if (losses.size() < n) return StopReason::budget;
  }
  return std::nullopt;
}

SimplexState NelderMead::state() const {
  SimplexState s;
  for (const auto& v : vertices_) s.vertices.push_back({ctx_.space().make_point(full(v.x)), v.loss});
  s.iteration = iteration_;
  s.restarts = restarts_;
  return s;
}

}  // namespace tunekit
