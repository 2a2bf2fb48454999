#pragma once

#include <string>
#include <vector>

#include "racmc/ops.hpp"

namespace racmc {

// Learned per-pair mask threshold: a shared trunk over concatenated
// (query-row, key-row) pairs with one output unit per head. One net is shared
// by both directions of an interaction pair.
struct ThresholdNet {
  Tensor W1, b1;  // 2N -> hidden
  Tensor W2, b2;  // hidden -> heads

  ThresholdNet() = default;
  ThresholdNet(Index n, Index hidden, Index heads, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct MaskedAttentionParams {
  Tensor W_q, W_k, W_v;  // [N x N], logically h heads of width d = N/h
  Tensor W_o;            // [N x N]
  Index heads = 1;

  MaskedAttentionParams() = default;
  MaskedAttentionParams(Index n, Index heads, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Optional per-call capture of mask matrices for diagnostics.
struct AttentionDiag {
  std::vector<Matrix> omega;  // one [B x B] mask per head
};

// Masked multi-head attention over batch rows (each sample is one token, so
// scores are B x B). Per head: S = softmax(Qh Kh^t / sqrt(d)); the mask gates
// S multiplicatively before a second softmax, so fully masked rows fall back
// to uniform attention rather than -inf. Train mode uses the sigmoid
// relaxation sigma((S - Theta)/tau) to keep Theta learnable; eval thresholds
// hard to {0,1}.
Tensor masked_attention(const Tensor& Q, const Tensor& K, const Tensor& V,
                        const MaskedAttentionParams& params, const ThresholdNet& threshold,
                        const Mode& mode, Rng& rng, AttentionDiag* diag = nullptr);

inline constexpr double kAttentionDropout = 0.1;

}  // namespace racmc
