#pragma once

#include <vector>

#include "racmc/fusion.hpp"
#include "racmc/mrc.hpp"

namespace racmc {

// Consistency/inconsistency features mined from M' against M^ = T' + I'.
struct ReasoningFeatures {
  Tensor m_hat;         // T' + I'
  Tensor f1;            // |M' - M^|, elementwise >= 0
  Tensor f2;            // M' * M^ elementwise
  Tensor f3;            // projection head over concat(M', M^)
  Tensor f4;            // iAFF(M', M^)
  Tensor fused_concat;  // concat(F1..F4), [B x 4N]
};

struct DfrParams {
  ProjectionHead consistency_head;  // concat(M', M^) -> N
  IaffParams consistency_fuse;

  DfrParams() = default;
  DfrParams(Index n, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
  void collect_buffers(const std::string& prefix, NamedBuffers& out);
};

ReasoningFeatures reasoning_features(const FusedFeatures& fused, DfrParams& params,
                                     const Mode& mode, Rng& rng);

// Two-layer classifier emitting class probabilities (columns: fake=0, real=1).
struct Classifier {
  Tensor W1, b1, W2, b2;

  Classifier() = default;
  Classifier(Index in_width, Index hidden, Rng& rng);
  Tensor forward(const Tensor& features) const;  // [B x 2] rows sum to 1
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Mean over the batch of -log(p[label]), probabilities clamped at 1e-12.
Tensor cross_entropy(const Tensor& probs, const std::vector<int>& labels);

struct LossReport {
  double l_ic = 0;
  double l_no = 0;
  double l_ni = 0;
  double l_ce = 0;
  double lambda = 0;
  double total = 0;  // lambda*l_ic + l_no + l_ni + l_ce
};

struct TotalLoss {
  Tensor value;
  LossReport report;
};

TotalLoss total_loss(double lambda, const Tensor& l_ic, const Tensor& l_no, const Tensor& l_ni,
                     const Tensor& l_ce);

}  // namespace racmc
