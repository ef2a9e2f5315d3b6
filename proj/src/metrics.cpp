#include "tunekit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tunekit/errors.hpp"

namespace tunekit::metrics {

namespace {

template <class A, class B>
void check_lengths(std::span<A> a, std::span<B> b) {
  if (a.size() != b.size()) {
    throw LengthMismatch("inputs have lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  if (a.empty()) throw EmptyInput("metric needs at least one element");
}

std::vector<int> to_labels(std::span<const double> v) {
  std::vector<int> out;
  out.reserve(v.size());
  for (double x : v) {
    if (x != std::round(x)) throw DegenerateLabels("label value " + std::to_string(x) + " is not integral");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

}  // namespace

double roc_auc(std::span<const int> labels, std::span<const double> scores) {
  check_lengths(labels, scores);
  const std::size_t n = labels.size();
  std::size_t positives = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw DegenerateLabels("labels must be 0 or 1");
    positives += static_cast<std::size_t>(y);
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw DegenerateLabels("roc_auc needs at least one positive and one negative label");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw NonFiniteInput("scores must be finite");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of 1-based ranks of the positives, ties sharing their average rank.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    std::size_t tied_pos = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      tied_pos += static_cast<std::size_t>(labels[order[j]]);
      ++j;
    }
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += avg_rank * static_cast<double>(tied_pos);
    i = j;
  }
  const double np = static_cast<double>(positives);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(negatives));
}

double accuracy(std::span<const int> labels, std::span<const int> predicted) {
  check_lengths(labels, predicted);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += labels[i] == predicted[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double mse(std::span<const double> targets, std::span<const double> predictions) {
  check_lengths(targets, predictions);
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = targets[i] - predictions[i];
    sum += d * d;
  }
  return sum / static_cast<double>(targets.size());
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"roc_auc", "accuracy", "mse"};
  return names;
}

double evaluate_metric(const std::string& name, std::span<const double> truth,
                       std::span<const double> predicted) {
  if (name == "roc_auc") {
    const auto labels = to_labels(truth);
    return roc_auc(labels, predicted);
  }
  if (name == "accuracy") {
    const auto a = to_labels(truth);
    const auto b = to_labels(predicted);
    return accuracy(a, b);
  }
  if (name == "mse") return mse(truth, predicted);
  throw UnknownMetric("unknown metric '" + name + "'");
}

}  // namespace tunekit::metrics
