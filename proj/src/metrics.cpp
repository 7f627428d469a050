// SPDX-License-Identifier: Apache-2.0
#include "vmclass/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "vmclass/error.hpp"

namespace vmclass {

ConfusionMatrix ConfusionMatrix::count(std::span<const int> predicted,
                                       std::span<const int> actual) {
  if (predicted.size() != actual.size())
    throw Error(ErrorCode::Shape, "prediction and label counts differ");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == 1, a = actual[i] == 1;
    if (p && a)
      ++cm.tp;
    else if (p)
      ++cm.fp;
    else if (a)
      ++cm.fn;
    else
      ++cm.tn;
  }
  return cm;
}

ClassificationMetrics compute_metrics(const ConfusionMatrix &cm) {
  ClassificationMetrics m;
  m.confusion = cm;
  auto ratio = [&m](std::size_t num, std::size_t den, const char *name) {
    if (den == 0) {
      m.undefined.emplace_back(name);
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = ratio(cm.tp + cm.tn, cm.total(), "accuracy");
  m.precision[1] = ratio(cm.tp, cm.tp + cm.fp, "precision_interactive");
  m.recall[1] = ratio(cm.tp, cm.tp + cm.fn, "recall_interactive");
  m.precision[0] = ratio(cm.tn, cm.tn + cm.fn, "precision_delay_insensitive");
  m.recall[0] = ratio(cm.tn, cm.tn + cm.fp, "recall_delay_insensitive");
  return m;
}

Summary summarize(std::span<const double> values) {
  if (values.empty())
    throw Error(ErrorCode::Data, "cannot summarize an empty set of values");
  Summary s;
  s.count = values.size();
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values)
    sum += v;
  s.mean = sum / static_cast<double>(s.count);
  double sq = 0.0;
  for (double v : values)
    sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(s.count));
  // Summation round-off can push the mean a hair outside [min,max] when all
  // values are equal.
  s.mean = std::clamp(s.mean, s.min, s.max);
  return s;
}

} // namespace vmclass
