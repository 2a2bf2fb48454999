#include "racmc/dfr.hpp"

#include "racmc/init.hpp"

namespace racmc {

DfrParams::DfrParams(Index n, Rng& rng)
    : consistency_head(2 * n, n, n, rng), consistency_fuse(n, kIaffReduction, rng) {}

void DfrParams::collect(const std::string& prefix, NamedParams& out) const {
  consistency_head.collect(prefix + ".consistency_head", out);
  consistency_fuse.collect(prefix + ".consistency_fuse", out);
}

void DfrParams::collect_buffers(const std::string& prefix, NamedBuffers& out) {
  consistency_head.collect_buffers(prefix + ".consistency_head", out);
  consistency_fuse.collect_buffers(prefix + ".consistency_fuse", out);
}

ReasoningFeatures reasoning_features(const FusedFeatures& fused, DfrParams& params,
                                     const Mode& mode, Rng& rng) {
  ReasoningFeatures out;
  out.m_hat = add(fused.t_prime, fused.i_prime);
  out.f1 = abs(sub(fused.m_prime, out.m_hat));
  out.f2 = mul(fused.m_prime, out.m_hat);
  out.f3 = params.consistency_head.forward(fused.m_prime, out.m_hat, mode, rng);
  out.f4 = iaff_fuse(fused.m_prime, out.m_hat, params.consistency_fuse, mode);
  out.fused_concat = concat_cols(concat_cols(out.f1, out.f2), concat_cols(out.f3, out.f4));
  return out;
}

Classifier::Classifier(Index in_width, Index hidden, Rng& rng)
    : W1(uniform_param(in_width, hidden, rng)),
      b1(zero_param(1, hidden)),
      W2(uniform_param(hidden, 2, rng)),
      b2(zero_param(1, 2)) {}

Tensor Classifier::forward(const Tensor& features) const {
  return softmax_rows(linear(relu(linear(features, W1, b1)), W2, b2));
}

void Classifier::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".W1", W1);
  out.emplace_back(prefix + ".b1", b1);
  out.emplace_back(prefix + ".W2", W2);
  out.emplace_back(prefix + ".b2", b2);
}

Tensor cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
  if (probs.cols() != 2)
    throw shape_error("cross_entropy: expected [B x 2] probabilities, got " +
                      std::to_string(probs.rows()) + "x" + std::to_string(probs.cols()));
  if (static_cast<Index>(labels.size()) != probs.rows())
    throw shape_error("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                      std::to_string(probs.rows()) + " rows");
  Matrix onehot = Matrix::Zero(probs.rows(), 2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw data_error("cross_entropy: label " + std::to_string(labels[i]) + " at row " +
                       std::to_string(i) + " is not 0 (fake) or 1 (real)");
    onehot(static_cast<Index>(i), labels[i]) = 1.0;
  }
  Tensor picked = row_sums(mul(probs, Tensor{std::move(onehot)}));  // [B x 1]
  return mul_scalar(sum_all(log(picked)), -1.0 / static_cast<double>(probs.rows()));
}

TotalLoss total_loss(double lambda, const Tensor& l_ic, const Tensor& l_no, const Tensor& l_ni,
                     const Tensor& l_ce) {
  TotalLoss out;
  out.value = add(add(add(mul_scalar(l_ic, lambda), l_no), l_ni), l_ce);
  out.report.l_ic = l_ic.item();
  out.report.l_no = l_no.item();
  out.report.l_ni = l_ni.item();
  out.report.l_ce = l_ce.item();
  out.report.lambda = lambda;
  out.report.total = out.value.item();
  return out;
}

}  // namespace racmc
