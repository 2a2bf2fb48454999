#include "racmc/attention.hpp"

#include <cmath>

#include "racmc/init.hpp"

namespace racmc {

ThresholdNet::ThresholdNet(Index n, Index hidden, Index heads, Rng& rng)
    : W1(uniform_param(2 * n, hidden, rng)),
      b1(zero_param(1, hidden)),
      W2(uniform_param(hidden, heads, rng)),
      b2(zero_param(1, heads)) {}

void ThresholdNet::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".W1", W1);
  out.emplace_back(prefix + ".b1", b1);
  out.emplace_back(prefix + ".W2", W2);
  out.emplace_back(prefix + ".b2", b2);
}

MaskedAttentionParams::MaskedAttentionParams(Index n, Index h, Rng& rng)
    : W_q(uniform_param(n, n, rng)),
      W_k(uniform_param(n, n, rng)),
      W_v(uniform_param(n, n, rng)),
      W_o(uniform_param(n, n, rng)),
      heads(h) {
  if (h <= 0 || n % h != 0)
    throw config_error("masked_attention: width " + std::to_string(n) +
                       " is not divisible by " + std::to_string(h) + " heads");
}

void MaskedAttentionParams::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".W_q", W_q);
  out.emplace_back(prefix + ".W_k", W_k);
  out.emplace_back(prefix + ".W_v", W_v);
  out.emplace_back(prefix + ".W_o", W_o);
}

Tensor masked_attention(const Tensor& Q, const Tensor& K, const Tensor& V,
                        const MaskedAttentionParams& params, const ThresholdNet& threshold,
                        const Mode& mode, Rng& rng, AttentionDiag* diag) {
  const Index batch = Q.rows();
  const Index n = Q.cols();
  const Index h = params.heads;
  if (h <= 0 || n % h != 0)
    throw config_error("masked_attention: width " + std::to_string(n) +
                       " is not divisible by " + std::to_string(h) + " heads");
  const Index d = n / h;

  Tensor Qp = matmul(Q, params.W_q);
  Tensor Kp = matmul(K, params.W_k);
  Tensor Vp = matmul(V, params.W_v);

  // Thresholds from the unprojected query/key rows: all (i,j) pairs stacked
  // row-major, one column per head.
  std::vector<Index> idx_i(static_cast<std::size_t>(batch * batch));
  std::vector<Index> idx_j(static_cast<std::size_t>(batch * batch));
  for (Index i = 0; i < batch; ++i)
    for (Index j = 0; j < batch; ++j) {
      idx_i[static_cast<std::size_t>(i * batch + j)] = i;
      idx_j[static_cast<std::size_t>(i * batch + j)] = j;
    }
  Tensor pairs = concat_cols(gather_rows(Q, idx_i), gather_rows(K, idx_j));  // [B^2 x 2N]
  Tensor theta_all = linear(relu(linear(pairs, threshold.W1, threshold.b1)),
                            threshold.W2, threshold.b2);  // [B^2 x h]

  Tensor out_heads;
  for (Index head = 0; head < h; ++head) {
    Tensor Qh = slice_cols(Qp, head * d, d);
    Tensor Kh = slice_cols(Kp, head * d, d);
    Tensor Vh = slice_cols(Vp, head * d, d);

    Tensor scores = softmax_rows(
        mul_scalar(matmul(Qh, transpose(Kh)), 1.0 / std::sqrt(static_cast<double>(d))));
    Tensor theta = reshape(slice_cols(theta_all, head, 1), batch, batch);

    Tensor omega;
    if (mode.soft_mask) {
      omega = sigmoid(mul_scalar(sub(scores, theta), 1.0 / mode.mask_tau));
    } else {
      omega = step_ge(scores, theta);  // detached hard mask
    }
    if (diag) diag->omega.push_back(omega.value());

    Tensor attn = softmax_rows(mul(omega, scores));
    attn = dropout(attn, kAttentionDropout, mode, rng);
    Tensor head_out = matmul(attn, Vh);  // [B x d]
    out_heads = head == 0 ? head_out : concat_cols(out_heads, head_out);
  }
  return matmul(out_heads, params.W_o);
}

}  // namespace racmc
