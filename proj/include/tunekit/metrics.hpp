#pragma once

#include <span>
#include <string>
#include <vector>

namespace tunekit::metrics {

/// Area under the ROC curve: P(s_pos > s_neg) + 0.5 P(s_pos = s_neg), from the
/// Mann-Whitney rank sum with average ranks for ties. Labels are 0 or 1.
/// Throws DegenerateLabels when a class is absent, LengthMismatch, EmptyInput.
double roc_auc(std::span<const int> labels, std::span<const double> scores);

/// Fraction of positions where labels[i] == predicted[i].
double accuracy(std::span<const int> labels, std::span<const int> predicted);

/// Mean squared error.
double mse(std::span<const double> targets, std::span<const double> predictions);

const std::vector<std::string>& metric_names();

/// Name-addressed metric over real-valued inputs ("roc_auc", "accuracy", "mse").
/// Label arguments must hold integral values. Throws UnknownMetric.
double evaluate_metric(const std::string& name, std::span<const double> truth,
                       std::span<const double> predicted);

}  // namespace tunekit::metrics
