#pragma once

#include <vector>

#include "racmc/errors.hpp"

namespace racmc {

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// Confusion-matrix summary with per-class precision/recall/F1 for the fake
// and real classes. 0/0 ratios are reported as 0.
struct MetricsReport {
  long confusion[2][2] = {{0, 0}, {0, 0}};  // [truth][prediction]
  long total = 0;
  double accuracy = 0;
  ClassMetrics fake;  // class 0
  ClassMetrics real;  // class 1

  static MetricsReport from_predictions(const std::vector<int>& truth,
                                        const std::vector<int>& predicted);
};

}  // namespace racmc
