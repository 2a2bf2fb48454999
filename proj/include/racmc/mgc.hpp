#pragma once

#include <vector>

#include "racmc/ops.hpp"

namespace racmc {

// Row indices of a batch split by label. Disjoint and exhaustive.
struct LabelSplit {
  std::vector<Index> positives;  // real, label 1
  std::vector<Index> negatives;  // fake, label 0

  static LabelSplit from_labels(const std::vector<int>& labels);
};

struct MmdResult {
  Tensor value;            // scalar, >= 0 up to rounding
  bool degenerate = false; // one of the sample sets was empty
  double bandwidth = 0.0;  // kernel sigma actually used
};

// Squared maximum mean discrepancy between the rows of x and y, biased
// V-statistic (self-pairs included) with Gaussian kernel
// K(a,b) = exp(-|a-b|^2 / (2 sigma^2)). bandwidth <= 0 selects the median
// heuristic over pooled pairwise distances (fallback 1.0 when the median is
// 0); the bandwidth is treated as a constant during backward either way.
MmdResult mmd_squared(const Tensor& x, const Tensor& y, double bandwidth = 0.0);

// Median of pairwise Euclidean distances over the stacked rows of x and y.
double median_heuristic_bandwidth(const Matrix& x, const Matrix& y);

struct NewsOverallLoss {
  Tensor value;  // -MMD^2(M'+, M'-), or 0 when a label group is empty
  bool degenerate = false;
  double bandwidth = 0.0;
};
NewsOverallLoss news_overall_loss(const Tensor& m_prime, const LabelSplit& split,
                                  double bandwidth = 0.0);

// Cosine similarity of two row vectors with a 1e-12 denominator floor.
// zero_flagged reports a zero-norm input if given.
Tensor cosine_sim(const Tensor& x, const Tensor& y, bool* zero_flagged = nullptr);

struct NewsInternalLoss {
  Tensor l_t;    // real news: pull matched pairs together, push others apart
  Tensor l_f;    // fake news: push every pair apart
  Tensor value;  // l_t + l_f
};
NewsInternalLoss news_internal_loss(const Tensor& t_prime, const Tensor& i_prime,
                                    const LabelSplit& split);

}  // namespace racmc
