#include "racmc/metrics.hpp"

#include <string>

namespace racmc {

namespace {

ClassMetrics class_metrics(const long confusion[2][2], int cls) {
  const int other = 1 - cls;
  const double tp = static_cast<double>(confusion[cls][cls]);
  const double fp = static_cast<double>(confusion[other][cls]);
  const double fn = static_cast<double>(confusion[cls][other]);
  ClassMetrics m;
  m.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

}  // namespace

MetricsReport MetricsReport::from_predictions(const std::vector<int>& truth,
                                              const std::vector<int>& predicted) {
  if (truth.size() != predicted.size())
    throw contract_error("metrics: " + std::to_string(truth.size()) + " labels vs " +
                         std::to_string(predicted.size()) + " predictions");
  if (truth.empty()) throw contract_error("metrics: empty evaluation");
  MetricsReport r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] > 1 || predicted[i] < 0 || predicted[i] > 1)
      throw data_error("metrics: labels must be 0 or 1");
    r.confusion[truth[i]][predicted[i]] += 1;
  }
  r.total = static_cast<long>(truth.size());
  r.accuracy =
      static_cast<double>(r.confusion[0][0] + r.confusion[1][1]) / static_cast<double>(r.total);
  r.fake = class_metrics(r.confusion, 0);
  r.real = class_metrics(r.confusion, 1);
  return r;
}

}  // namespace racmc
