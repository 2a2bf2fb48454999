#pragma once

#include <string>
#include <utility>
#include <vector>

#include "racmc/attention.hpp"
#include "racmc/encoder.hpp"
#include "racmc/fusion.hpp"

namespace racmc {

// One bidirectional interaction: each direction owns its projections, the
// threshold net is shared (pair relevance is symmetric).
struct InteractionPairParams {
  MaskedAttentionParams fwd;  // Q = first feature of the pair
  MaskedAttentionParams rev;  // Q = second feature of the pair
  ThresholdNet threshold;

  InteractionPairParams() = default;
  InteractionPairParams(Index n, Index heads, Index threshold_hidden, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
};

// The eight post-interaction features, each a residual add of its query input
// and a masked-attention output.
struct InteractionSet {
  Tensor t_fc, t_cf;  // text fine<->coarse
  Tensor i_fc, i_cf;  // image fine<->coarse
  Tensor m_f1, m_f2;  // fine-grained cross-modal (text-led, image-led)
  Tensor m_c1, m_c2;  // coarse-grained cross-modal
};

// Fused outputs plus the intermediates the constraint losses consume.
struct FusedFeatures {
  Tensor t_prime, i_prime, m_prime;
  Tensor t_o, i_o;       // projection of raw + coarse originals
  Tensor m_o1, m_o2;     // multimodal originals (fine, coarse)
  Tensor m_f, m_c;       // fused multimodal features per granularity
};

struct MrcParams {
  InteractionPairParams text_pair;    // T^f~ <-> T^c
  InteractionPairParams image_pair;   // I^f~ <-> I^c
  InteractionPairParams fine_cross;   // T^f~ <-> I^f~
  InteractionPairParams coarse_cross; // T^c <-> I^c

  ProjectionHead text_origin;         // concat(T^f raw, T^c)
  ProjectionHead text_inter;          // concat(T^fc, T^cf)
  ProjectionHead image_origin, image_inter;
  ProjectionHead multi_fine_origin;   // concat(T^f raw, I^f raw)
  ProjectionHead multi_fine_inter;    // concat(M^f1, M^f2)
  ProjectionHead multi_coarse_origin; // concat(T^c, I^c)
  ProjectionHead multi_coarse_inter;  // concat(M^c1, M^c2)
  ProjectionHead multi_out;           // concat(M^f, M^c) back to width N

  IaffParams text_fuse, image_fuse, multi_fine_fuse, multi_coarse_fuse;

  MrcParams() = default;
  MrcParams(const DataDims& dims, Index n, Index heads, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
  void collect_buffers(const std::string& prefix, NamedBuffers& out);
};

struct MrcDiag {
  // "t_fc.h0" style keys; one B x B mask per interaction and head
  std::vector<std::pair<std::string, Matrix>> omega;
  // "text_fuse" style keys; the final B x N gate of each fusion
  std::vector<std::pair<std::string, Matrix>> k_tilde;
};

InteractionSet interact_granularities(const EncodedBatch& batch, const MrcParams& params,
                                      const Mode& mode, Rng& rng, MrcDiag* diag = nullptr);

FusedFeatures residual_fuse(const EncodedBatch& batch, const InteractionSet& inter,
                            MrcParams& params, const Mode& mode, Rng& rng,
                            MrcDiag* diag = nullptr);

std::pair<InteractionSet, FusedFeatures> mrc_forward(const EncodedBatch& batch,
                                                     MrcParams& params, const Mode& mode,
                                                     Rng& rng, MrcDiag* diag = nullptr);

}  // namespace racmc
