#pragma once

#include "racmc/mrc.hpp"

namespace racmc {

// Row-wise KL divergence between feature tensors, both mapped to
// distributions by a softmax over the feature axis, averaged over rows.
// Gradients flow through both arguments.
Tensor kl_divergence(const Tensor& p_logits, const Tensor& q_logits);

// ||A B^t||_F, the Frobenius norm of the cross-Gram matrix between two
// feature blocks with equal widths.
Tensor cross_gram_norm(const Tensor& a, const Tensor& b);

struct ConsistencyTerms {
  Tensor text, image, multi;  // l_c^T, l_c^I, l_c^M
};
ConsistencyTerms consistency_loss(const InteractionSet& inter, const FusedFeatures& fused);

struct ExclusivityTerms {
  Tensor text, image, multi;  // l_e^T, l_e^I, l_e^M
};
ExclusivityTerms exclusivity_loss(const EncodedBatch& batch, const InteractionSet& inter);

struct InteractionLossReport {
  double l_c_text = 0, l_c_image = 0, l_c_multi = 0;
  double l_e_text = 0, l_e_image = 0, l_e_multi = 0;
  double total = 0;
};

struct InteractionLoss {
  Tensor value;  // scalar, sum of the six components
  InteractionLossReport report;
};

InteractionLoss interaction_loss(const EncodedBatch& batch, const InteractionSet& inter,
                                 const FusedFeatures& fused);

}  // namespace racmc
