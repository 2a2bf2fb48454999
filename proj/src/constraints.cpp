#include "racmc/constraints.hpp"

namespace racmc {

Tensor kl_divergence(const Tensor& p_logits, const Tensor& q_logits) {
  if (p_logits.rows() != q_logits.rows() || p_logits.cols() != q_logits.cols())
    throw shape_error("kl_divergence: shape mismatch " + std::to_string(p_logits.rows()) + "x" +
                      std::to_string(p_logits.cols()) + " vs " + std::to_string(q_logits.rows()) +
                      "x" + std::to_string(q_logits.cols()));
  Tensor p = softmax_rows(p_logits);
  Tensor q = softmax_rows(q_logits);
  Tensor per_entry = mul(p, sub(log(p), log(q)));
  return mul_scalar(sum_all(per_entry), 1.0 / static_cast<double>(p.rows()));
}

Tensor cross_gram_norm(const Tensor& a, const Tensor& b) {
  return frobenius_norm(matmul(a, transpose(b)));
}

ConsistencyTerms consistency_loss(const InteractionSet& inter, const FusedFeatures& fused) {
  ConsistencyTerms out;
  out.text = add(kl_divergence(fused.m_prime, inter.t_fc),
                 kl_divergence(fused.m_prime, inter.t_cf));
  out.image = add(kl_divergence(fused.m_prime, inter.i_fc),
                  kl_divergence(fused.m_prime, inter.i_cf));
  // the dominant (query-role) unimodal feature anchors each multimodal term
  out.multi = add(add(kl_divergence(fused.t_prime, inter.m_f1),
                      kl_divergence(fused.t_prime, inter.m_c1)),
                  add(kl_divergence(fused.i_prime, inter.m_f2),
                      kl_divergence(fused.i_prime, inter.m_c2)));
  return out;
}

ExclusivityTerms exclusivity_loss(const EncodedBatch& batch, const InteractionSet& inter) {
  const double inv_b2 =
      1.0 / static_cast<double>(batch.batch_size() * batch.batch_size());
  auto pair_terms = [&](const Tensor& src_a, const Tensor& src_b, const Tensor& inter_ab,
                        const Tensor& inter_ba) {
    Tensor sum = add(add(cross_gram_norm(src_a, inter_ab), cross_gram_norm(src_b, inter_ab)),
                     add(cross_gram_norm(src_b, inter_ba), cross_gram_norm(src_a, inter_ba)));
    return mul_scalar(sum, inv_b2);
  };

  ExclusivityTerms out;
  out.text = pair_terms(batch.text_fine, batch.text_coarse, inter.t_fc, inter.t_cf);
  out.image = pair_terms(batch.image_fine, batch.image_coarse, inter.i_fc, inter.i_cf);
  // each multimodal interaction feature against both of its source inputs
  Tensor fine = add(add(cross_gram_norm(batch.text_fine, inter.m_f1),
                        cross_gram_norm(batch.image_fine, inter.m_f1)),
                    add(cross_gram_norm(batch.text_fine, inter.m_f2),
                        cross_gram_norm(batch.image_fine, inter.m_f2)));
  Tensor coarse = add(add(cross_gram_norm(batch.text_coarse, inter.m_c1),
                          cross_gram_norm(batch.image_coarse, inter.m_c1)),
                      add(cross_gram_norm(batch.text_coarse, inter.m_c2),
                          cross_gram_norm(batch.image_coarse, inter.m_c2)));
  out.multi = mul_scalar(add(fine, coarse), inv_b2);
  return out;
}

InteractionLoss interaction_loss(const EncodedBatch& batch, const InteractionSet& inter,
                                 const FusedFeatures& fused) {
  ConsistencyTerms c = consistency_loss(inter, fused);
  ExclusivityTerms e = exclusivity_loss(batch, inter);
  InteractionLoss out;
  out.value = add(add(add(add(add(c.text, c.image), c.multi), e.text), e.image), e.multi);
  out.report.l_c_text = c.text.item();
  out.report.l_c_image = c.image.item();
  out.report.l_c_multi = c.multi.item();
  out.report.l_e_text = e.text.item();
  out.report.l_e_image = e.image.item();
  out.report.l_e_multi = e.multi.item();
  out.report.total = out.value.item();
  return out;
}

}  // namespace racmc
