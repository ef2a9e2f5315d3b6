#include <algorithm>
#include <cmath>
#include <numeric>

#include "solvers_internal.hpp"
#include "tunekit/errors.hpp"
#include "tunekit/solvers.hpp"

namespace tunekit {

namespace {

constexpr double kMaxCondition = 1e14;
// Negative eigenvalues of this relative size are rounding noise and get repaired.
constexpr double kRepairTolerance = 1e-8;

}  // namespace

CmaesSettings CmaesSettings::from(const SolverConfig& config) {
  CmaesSettings s;
  if (config.has("sigma0")) {
    s.sigma0 = config.number("sigma0", 0.0);
    if (*s.sigma0 <= 0) throw InvalidSetting("cmaes sigma0 must be positive");
  }
  if (config.has("lambda")) s.lambda = detail::count_setting(config, "lambda", 0, 2);
  if (config.has("start")) s.start = config.list("start");
  s.tolx = config.number("tolx", s.tolx);
  if (s.tolx < 0) throw InvalidSetting("cmaes tolx must be nonnegative");
  return s;
}

Cmaes::Cmaes(EvalContext& ctx, CmaesSettings settings)
    : ctx_(ctx),
      settings_(std::move(settings)),
      free_(ctx.space().free_dims()),
      n_(free_.size()),
      rng_(make_rng(ctx.seed(), 3)) {
  const auto& space = ctx_.space();
  const auto n = static_cast<Eigen::Index>(n_);
  const auto nd = static_cast<double>(n_);

  double mean_width = 0.0;
  for (auto i : free_) mean_width += space[i].width();
  mean_width /= nd;
  scale_.resize(n);
  lower_.resize(n);
  upper_.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& d = space[free_[static_cast<std::size_t>(k)]];
    scale_[k] = d.width() / mean_width;
    lower_[k] = d.lower / scale_[k];
    upper_[k] = d.upper / scale_[k];
  }

  lambda_ = settings_.lambda.value_or(4 + static_cast<std::size_t>(std::floor(3.0 * std::log(nd))));
  mu_ = lambda_ / 2;
  weights_.resize(static_cast<Eigen::Index>(mu_));
  for (std::size_t i = 0; i < mu_; ++i) {
    weights_[static_cast<Eigen::Index>(i)] =
        std::log(static_cast<double>(mu_) + 0.5) - std::log(static_cast<double>(i) + 1.0);
  }
  weights_ /= weights_.sum();
  mueff_ = 1.0 / weights_.squaredNorm();

  cc_ = (4.0 + mueff_ / nd) / (nd + 4.0 + 2.0 * mueff_ / nd);
  cs_ = (mueff_ + 2.0) / (nd + mueff_ + 5.0);
  c1_ = 2.0 / ((nd + 1.3) * (nd + 1.3) + mueff_);
  cmu_ = std::min(1.0 - c1_, 2.0 * (mueff_ - 2.0 + 1.0 / mueff_) / ((nd + 2.0) * (nd + 2.0) + mueff_));
  damps_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff_ - 1.0) / (nd + 1.0)) - 1.0) + cs_;
  chin_ = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));

  const auto start = detail::start_point(space, settings_.start);
  state_.mean.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) state_.mean[k] = start[free_[static_cast<std::size_t>(k)]] / scale_[k];
  state_.sigma = settings_.sigma0.value_or(0.3 * mean_width);
  state_.covariance = Eigen::MatrixXd::Identity(n, n);
  state_.path_sigma = Eigen::VectorXd::Zero(n);
  state_.path_c = Eigen::VectorXd::Zero(n);
  basis_ = Eigen::MatrixXd::Identity(n, n);
  eigenvalues_ = Eigen::VectorXd::Ones(n);
}

std::vector<double> Cmaes::full(const Eigen::VectorXd& u) const {
  std::vector<double> v = detail::start_point(ctx_.space(), settings_.start);
  for (std::size_t i = 0; i < free_.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    v[free_[i]] = u[k] * scale_[k];
  }
  clamp_values(ctx_.space(), v);
  return v;
}

void Cmaes::decompose() {
  auto& c = state_.covariance;
  c = 0.5 * (c + c.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c);
  if (solver.info() != Eigen::Success || !solver.eigenvalues().allFinite()) {
    throw CovarianceDegenerate("covariance eigendecomposition failed");
  }
  Eigen::VectorXd ev = solver.eigenvalues();
  const double top = ev.maxCoeff();
  if (top <= 0.0) throw CovarianceDegenerate("covariance has no positive eigenvalue");
  if (ev.minCoeff() <= 0.0) {
    if (ev.minCoeff() < -kRepairTolerance * top) {
      throw CovarianceDegenerate("covariance lost positive-definiteness");
    }
    ev = ev.cwiseMax(top / kMaxCondition);
    c = solver.eigenvectors() * ev.asDiagonal() * solver.eigenvectors().transpose();
  }
  basis_ = solver.eigenvectors();
  eigenvalues_ = ev;
}

std::optional<StopReason> Cmaes::step() {
  if (ctx_.exhausted()) return StopReason::budget;
  const auto n = static_cast<Eigen::Index>(n_);
  auto& s = state_;

  const Eigen::VectorXd d = eigenvalues_.cwiseSqrt();
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Eigen::VectorXd> samples;
  std::vector<std::vector<double>> batch;
  for (std::size_t k = 0; k < lambda_; ++k) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = gauss(rng_);
    Eigen::VectorXd u = s.mean + s.sigma * (basis_ * d.cwiseProduct(z));
    u = u.cwiseMax(lower_).cwiseMin(upper_);
    samples.push_back(u);
    batch.push_back(full(u));
  }
  const auto losses = ctx_.evaluate(batch);
  if (losses.size() < lambda_) return StopReason::budget;

  std::vector<std::size_t> order(lambda_);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });

  const Eigen::VectorXd old_mean = s.mean;
  Eigen::MatrixXd steps(n, static_cast<Eigen::Index>(mu_));
  Eigen::VectorXd new_mean = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < mu_; ++i) {
    const auto& x = samples[order[i]];
    new_mean += weights_[static_cast<Eigen::Index>(i)] * x;
    steps.col(static_cast<Eigen::Index>(i)) = (x - old_mean) / s.sigma;
  }
  s.mean = new_mean;
  const Eigen::VectorXd step_w = (new_mean - old_mean) / s.sigma;

  const Eigen::MatrixXd inv_sqrt =
      basis_ * eigenvalues_.cwiseSqrt().cwiseInverse().asDiagonal() * basis_.transpose();
  s.path_sigma = (1.0 - cs_) * s.path_sigma + std::sqrt(cs_ * (2.0 - cs_) * mueff_) * (inv_sqrt * step_w);

  const double gen = static_cast<double>(s.generation + 1);
  const double ps_norm = s.path_sigma.norm();
  const bool hsig = ps_norm / std::sqrt(1.0 - std::pow(1.0 - cs_, 2.0 * gen)) / chin_ <
                    1.4 + 2.0 / (static_cast<double>(n_) + 1.0);
  s.path_c = (1.0 - cc_) * s.path_c;
  if (hsig) s.path_c += std::sqrt(cc_ * (2.0 - cc_) * mueff_) * step_w;

  const double hsig_correction = hsig ? 0.0 : c1_ * cc_ * (2.0 - cc_);
  s.covariance = (1.0 - c1_ - cmu_ + hsig_correction) * s.covariance +
                 c1_ * s.path_c * s.path_c.transpose() +
                 cmu_ * steps * weights_.asDiagonal() * steps.transpose();

  s.sigma *= std::exp((cs_ / damps_) * (ps_norm / chin_ - 1.0));
  if (!std::isfinite(s.sigma) || s.sigma <= 0.0) {
    throw CovarianceDegenerate("step size left the positive reals");
  }
  ++s.generation;
  decompose();

  if (eigenvalues_.maxCoeff() > kMaxCondition * eigenvalues_.minCoeff()) return StopReason::stalled;
  if (s.sigma * std::sqrt(eigenvalues_.maxCoeff()) < settings_.tolx) return StopReason::converged;
  if (ctx_.exhausted()) return StopReason::budget;
  return std::nullopt;
}

}  // namespace tunekit
