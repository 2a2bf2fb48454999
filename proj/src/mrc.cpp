#include "racmc/mrc.hpp"

namespace racmc {

InteractionPairParams::InteractionPairParams(Index n, Index heads, Index threshold_hidden,
                                             Rng& rng)
    : fwd(n, heads, rng), rev(n, heads, rng), threshold(n, threshold_hidden, heads, rng) {}

void InteractionPairParams::collect(const std::string& prefix, NamedParams& out) const {
  fwd.collect(prefix + ".fwd", out);
  rev.collect(prefix + ".rev", out);
  threshold.collect(prefix + ".threshold", out);
}

MrcParams::MrcParams(const DataDims& dims, Index n, Index heads, Rng& rng)
    : text_pair(n, heads, n, rng),
      image_pair(n, heads, n, rng),
      fine_cross(n, heads, n, rng),
      coarse_cross(n, heads, n, rng),
      text_origin(dims.n1 + n, n, n, rng),
      text_inter(2 * n, n, n, rng),
      image_origin(dims.n2 + n, n, n, rng),
      image_inter(2 * n, n, n, rng),
      multi_fine_origin(dims.n1 + dims.n2, n, n, rng),
      multi_fine_inter(2 * n, n, n, rng),
      multi_coarse_origin(2 * n, n, n, rng),
      multi_coarse_inter(2 * n, n, n, rng),
      multi_out(2 * n, n, n, rng),
      text_fuse(n, kIaffReduction, rng),
      image_fuse(n, kIaffReduction, rng),
      multi_fine_fuse(n, kIaffReduction, rng),
      multi_coarse_fuse(n, kIaffReduction, rng) {}

void MrcParams::collect(const std::string& prefix, NamedParams& out) const {
  text_pair.collect(prefix + ".text_pair", out);
  image_pair.collect(prefix + ".image_pair", out);
  fine_cross.collect(prefix + ".fine_cross", out);
  coarse_cross.collect(prefix + ".coarse_cross", out);
  text_origin.collect(prefix + ".text_origin", out);
  text_inter.collect(prefix + ".text_inter", out);
  image_origin.collect(prefix + ".image_origin", out);
  image_inter.collect(prefix + ".image_inter", out);
  multi_fine_origin.collect(prefix + ".multi_fine_origin", out);
  multi_fine_inter.collect(prefix + ".multi_fine_inter", out);
  multi_coarse_origin.collect(prefix + ".multi_coarse_origin", out);
  multi_coarse_inter.collect(prefix + ".multi_coarse_inter", out);
  multi_out.collect(prefix + ".multi_out", out);
  text_fuse.collect(prefix + ".text_fuse", out);
  image_fuse.collect(prefix + ".image_fuse", out);
  multi_fine_fuse.collect(prefix + ".multi_fine_fuse", out);
  multi_coarse_fuse.collect(prefix + ".multi_coarse_fuse", out);
}

void MrcParams::collect_buffers(const std::string& prefix, NamedBuffers& out) {
  text_origin.collect_buffers(prefix + ".text_origin", out);
  text_inter.collect_buffers(prefix + ".text_inter", out);
  image_origin.collect_buffers(prefix + ".image_origin", out);
  image_inter.collect_buffers(prefix + ".image_inter", out);
  multi_fine_origin.collect_buffers(prefix + ".multi_fine_origin", out);
  multi_fine_inter.collect_buffers(prefix + ".multi_fine_inter", out);
  multi_coarse_origin.collect_buffers(prefix + ".multi_coarse_origin", out);
  multi_coarse_inter.collect_buffers(prefix + ".multi_coarse_inter", out);
  multi_out.collect_buffers(prefix + ".multi_out", out);
  text_fuse.collect_buffers(prefix + ".text_fuse", out);
  image_fuse.collect_buffers(prefix + ".image_fuse", out);
  multi_fine_fuse.collect_buffers(prefix + ".multi_fine_fuse", out);
  multi_coarse_fuse.collect_buffers(prefix + ".multi_coarse_fuse", out);
}

namespace {

Tensor interact_one(const Tensor& q, const Tensor& kv, const MaskedAttentionParams& attn,
                    const ThresholdNet& thr, const Mode& mode, Rng& rng, MrcDiag* diag,
                    const char* name) {
  AttentionDiag local;
  Tensor o = masked_attention(q, kv, kv, attn, thr, mode, rng, diag ? &local : nullptr);
  if (diag)
    for (std::size_t h = 0; h < local.omega.size(); ++h)
      diag->omega.emplace_back(std::string(name) + ".h" + std::to_string(h),
                               std::move(local.omega[h]));
  return add(q, o);  // residual compensation
}

}  // namespace

InteractionSet interact_granularities(const EncodedBatch& batch, const MrcParams& params,
                                      const Mode& mode, Rng& rng, MrcDiag* diag) {
  InteractionSet out;
  out.t_fc = interact_one(batch.text_fine, batch.text_coarse, params.text_pair.fwd,
                          params.text_pair.threshold, mode, rng, diag, "t_fc");
  out.t_cf = interact_one(batch.text_coarse, batch.text_fine, params.text_pair.rev,
                          params.text_pair.threshold, mode, rng, diag, "t_cf");
  out.i_fc = interact_one(batch.image_fine, batch.image_coarse, params.image_pair.fwd,
                          params.image_pair.threshold, mode, rng, diag, "i_fc");
  out.i_cf = interact_one(batch.image_coarse, batch.image_fine, params.image_pair.rev,
                          params.image_pair.threshold, mode, rng, diag, "i_cf");
  out.m_f1 = interact_one(batch.text_fine, batch.image_fine, params.fine_cross.fwd,
                          params.fine_cross.threshold, mode, rng, diag, "m_f1");
  out.m_f2 = interact_one(batch.image_fine, batch.text_fine, params.fine_cross.rev,
                          params.fine_cross.threshold, mode, rng, diag, "m_f2");
  out.m_c1 = interact_one(batch.text_coarse, batch.image_coarse, params.coarse_cross.fwd,
                          params.coarse_cross.threshold, mode, rng, diag, "m_c1");
  out.m_c2 = interact_one(batch.image_coarse, batch.text_coarse, params.coarse_cross.rev,
                          params.coarse_cross.threshold, mode, rng, diag, "m_c2");
  return out;
}

FusedFeatures residual_fuse(const EncodedBatch& batch, const InteractionSet& inter,
                            MrcParams& params, const Mode& mode, Rng& rng, MrcDiag* diag) {
  auto fuse = [&](const Tensor& x, const Tensor& y, IaffParams& p, const char* name) {
    Matrix k_tilde;
    Tensor out = iaff_fuse(x, y, p, mode, diag ? &k_tilde : nullptr);
    if (diag) diag->k_tilde.emplace_back(name, std::move(k_tilde));
    return out;
  };

  FusedFeatures out;
  out.t_o = params.text_origin.forward(batch.text_fine_raw, batch.text_coarse, mode, rng);
  Tensor t_mid = params.text_inter.forward(inter.t_fc, inter.t_cf, mode, rng);
  out.t_prime = fuse(out.t_o, t_mid, params.text_fuse, "text_fuse");

  out.i_o = params.image_origin.forward(batch.image_fine_raw, batch.image_coarse, mode, rng);
  Tensor i_mid = params.image_inter.forward(inter.i_fc, inter.i_cf, mode, rng);
  out.i_prime = fuse(out.i_o, i_mid, params.image_fuse, "image_fuse");

  out.m_o1 = params.multi_fine_origin.forward(batch.text_fine_raw, batch.image_fine_raw,
                                              mode, rng);
  Tensor m1 = params.multi_fine_inter.forward(inter.m_f1, inter.m_f2, mode, rng);
  out.m_f = fuse(out.m_o1, m1, params.multi_fine_fuse, "multi_fine_fuse");

  out.m_o2 = params.multi_coarse_origin.forward(batch.text_coarse, batch.image_coarse,
                                                mode, rng);
  Tensor m2 = params.multi_coarse_inter.forward(inter.m_c1, inter.m_c2, mode, rng);
  out.m_c = fuse(out.m_o2, m2, params.multi_coarse_fuse, "multi_coarse_fuse");

  // concat(M^f, M^c) is B x 2N; a projection head restores the common width
  out.m_prime = params.multi_out.forward(out.m_f, out.m_c, mode, rng);
  return out;
}

std::pair<InteractionSet, FusedFeatures> mrc_forward(const EncodedBatch& batch,
                                                     MrcParams& params, const Mode& mode,
                                                     Rng& rng, MrcDiag* diag) {
  InteractionSet inter = interact_granularities(batch, params, mode, rng, diag);
  FusedFeatures fused = residual_fuse(batch, inter, params, mode, rng, diag);
  return {std::move(inter), std::move(fused)};
}

}  // namespace racmc
