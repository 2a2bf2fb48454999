#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "racmc/data.hpp"
#include "racmc/ops.hpp"

namespace racmc {

// Learnable projections taking every feature block to the common width N.
// Coarse blocks are projected too, even when n_raw == N, to absorb scale
// differences between sources.
struct EncoderParams {
  Tensor W_text_fine, b_text_fine;      // n1 -> N
  Tensor W_image_fine, b_image_fine;    // n2 -> N
  Tensor W_text_coarse, b_text_coarse;  // n_raw -> N
  Tensor W_image_coarse, b_image_coarse;

  EncoderParams() = default;
  EncoderParams(const DataDims& dims, Index n_common, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
};

// The four projected blocks plus the raw fine-grained originals (the fusion
// stage consumes both) and labels.
struct EncodedBatch {
  Tensor text_fine_raw;    // [B x n1]
  Tensor image_fine_raw;   // [B x n2]
  Tensor text_fine;        // T^f projected, [B x N]
  Tensor text_coarse;      // [B x N]
  Tensor image_fine;       // [B x N]
  Tensor image_coarse;     // [B x N]
  std::vector<int> labels;

  Index batch_size() const { return text_fine.rows(); }
};

EncodedBatch encode_batch(std::span<const NewsRecord> records, const EncoderParams& params);

}  // namespace racmc
