// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vmclass {

/// Two-class confusion counts with class 1 (interactive) as positive.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }

  static ConfusionMatrix count(std::span<const int> predicted, std::span<const int> actual);

  friend bool operator==(const ConfusionMatrix &, const ConfusionMatrix &) = default;
};

struct ClassificationMetrics {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  // Indexed by class: [0] delay-insensitive as positive, [1] interactive.
  std::array<double, 2> precision{};
  std::array<double, 2> recall{};
  /// Names of metrics whose denominator was zero (reported as 0).
  std::vector<std::string> undefined;
};

ClassificationMetrics compute_metrics(const ConfusionMatrix &cm);

/// Population statistics over a set of run results.
struct Summary {
  double min = 0.0;
  double mean = 0.0;
  double std = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

Summary summarize(std::span<const double> values);

} // namespace vmclass
