#include "racmc/fusion.hpp"

#include <algorithm>

#include "racmc/init.hpp"

namespace racmc {

ProjectionHead::ProjectionHead(Index in_width, Index hidden, Index out_width, Rng& rng)
    : W1(uniform_param(in_width, hidden, rng)),
      b1(zero_param(1, hidden)),
      bn(hidden),
      W2(uniform_param(hidden, out_width, rng)),
      b2(zero_param(1, out_width)) {}

Tensor ProjectionHead::forward(const Tensor& a, const Tensor& b, const Mode& mode, Rng& rng) {
  Tensor h = relu(bn.forward(linear(concat_cols(a, b), W1, b1), mode));
  return linear(dropout(h, kHeadDropout, mode, rng), W2, b2);
}

void ProjectionHead::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".W1", W1);
  out.emplace_back(prefix + ".b1", b1);
  bn.collect(prefix + ".bn", out);
  out.emplace_back(prefix + ".W2", W2);
  out.emplace_back(prefix + ".b2", b2);
}

void ProjectionHead::collect_buffers(const std::string& prefix, NamedBuffers& out) {
  bn.collect_buffers(prefix + ".bn", out);
}

GateBranch::GateBranch(Index in_width, Index hidden, Index out_width, Rng& rng)
    : W1(uniform_param(in_width, hidden, rng)),
      b1(zero_param(1, hidden)),
      bn1(hidden),
      W2(uniform_param(hidden, out_width, rng)),
      b2(zero_param(1, out_width)),
      bn2(out_width, /*gamma_init=*/0.0) {}

Tensor GateBranch::forward(const Tensor& z, const Mode& mode) {
  Tensor h = relu(bn1.forward(linear(z, W1, b1), mode));
  return bn2.forward(linear(h, W2, b2), mode);
}

void GateBranch::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".W1", W1);
  out.emplace_back(prefix + ".b1", b1);
  bn1.collect(prefix + ".bn1", out);
  out.emplace_back(prefix + ".W2", W2);
  out.emplace_back(prefix + ".b2", b2);
  bn2.collect(prefix + ".bn2", out);
}

void GateBranch::collect_buffers(const std::string& prefix, NamedBuffers& out) {
  bn1.collect_buffers(prefix + ".bn1", out);
  bn2.collect_buffers(prefix + ".bn2", out);
}

IaffParams::IaffParams(Index n, Index reduction, Rng& rng) {
  const Index hidden = std::max<Index>(n / reduction, 1);
  global1 = GateBranch(1, hidden, n, rng);
  local1 = GateBranch(n, hidden, n, rng);
  global2 = GateBranch(1, hidden, n, rng);
  local2 = GateBranch(n, hidden, n, rng);
}

void IaffParams::collect(const std::string& prefix, NamedParams& out) const {
  global1.collect(prefix + ".global1", out);
  local1.collect(prefix + ".local1", out);
  global2.collect(prefix + ".global2", out);
  local2.collect(prefix + ".local2", out);
}

void IaffParams::collect_buffers(const std::string& prefix, NamedBuffers& out) {
  global1.collect_buffers(prefix + ".global1", out);
  local1.collect_buffers(prefix + ".local1", out);
  global2.collect_buffers(prefix + ".global2", out);
  local2.collect_buffers(prefix + ".local2", out);
}

namespace {

Tensor feature_mean(const Tensor& z) {
  return mul_scalar(row_sums(z), 1.0 / static_cast<double>(z.cols()));  // [B x 1]
}

Tensor gate(const Tensor& z, GateBranch& global, GateBranch& local, const Mode& mode) {
  return sigmoid(add(global.forward(feature_mean(z), mode), local.forward(z, mode)));
}

}  // namespace

Tensor iaff_fuse(const Tensor& X, const Tensor& Y, IaffParams& params, const Mode& mode,
                 Matrix* k_tilde_out) {
  if (X.rows() != Y.rows() || X.cols() != Y.cols())
    throw shape_error("iaff_fuse: shape mismatch " + std::to_string(X.rows()) + "x" +
                      std::to_string(X.cols()) + " vs " + std::to_string(Y.rows()) + "x" +
                      std::to_string(Y.cols()));
  Tensor k = gate(add(X, Y), params.global1, params.local1, mode);
  Tensor diff = sub(X, Y);
  // X*K + Y*(1-K), written as Y + (X-Y)*K so equal inputs pass through exactly
  Tensor gated = add(Y, mul(diff, k));
  Tensor k_tilde = gate(gated, params.global2, params.local2, mode);
  if (k_tilde_out) *k_tilde_out = k_tilde.value();
  return add(Y, mul(diff, k_tilde));
}

}  // namespace racmc
