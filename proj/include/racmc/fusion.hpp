#pragma once

#include <string>

#include "racmc/ops.hpp"

namespace racmc {

inline constexpr double kHeadDropout = 0.4;

// Two-layer head over a column-concatenated feature pair:
// concat -> linear -> batch norm -> relu -> dropout(0.4) -> linear (width N).
struct ProjectionHead {
  Tensor W1, b1;
  BatchNorm bn;
  Tensor W2, b2;

  ProjectionHead() = default;
  ProjectionHead(Index in_width, Index hidden, Index out_width, Rng& rng);

  Tensor forward(const Tensor& a, const Tensor& b, const Mode& mode, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
  void collect_buffers(const std::string& prefix, NamedBuffers& out);
};

// One channel-attention gate branch, the five-tier stack
// transform - normalize - activate - transform - normalize. The final
// normalization starts with zero scale so an untrained gate sits at
// sigma(0) = 1/2 and fusion begins as a plain average.
struct GateBranch {
  Tensor W1, b1;
  BatchNorm bn1;
  Tensor W2, b2;
  BatchNorm bn2;

  GateBranch() = default;
  GateBranch(Index in_width, Index hidden, Index out_width, Rng& rng);

  Tensor forward(const Tensor& z, const Mode& mode);
  void collect(const std::string& prefix, NamedParams& out) const;
  void collect_buffers(const std::string& prefix, NamedBuffers& out);
};

// Iterative attentional feature fusion: two rounds of sigmoid gating, each
// combining a global branch (rows mean-pooled to one channel first) and a
// local per-element branch. Output is the K-tilde convex combination of the
// inputs, computed as Y + (X - Y) * K so that iaff(X, X) == X bitwise.
struct IaffParams {
  GateBranch global1, local1;  // produce K from X + Y
  GateBranch global2, local2;  // produce K-tilde from gated sum

  IaffParams() = default;
  IaffParams(Index n, Index reduction, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
  void collect_buffers(const std::string& prefix, NamedBuffers& out);
};

inline constexpr Index kIaffReduction = 4;

Tensor iaff_fuse(const Tensor& X, const Tensor& Y, IaffParams& params, const Mode& mode,
                 Matrix* k_tilde_out = nullptr);

}  // namespace racmc
