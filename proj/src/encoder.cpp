#include "racmc/encoder.hpp"

#include "racmc/errors.hpp"
#include "racmc/init.hpp"

namespace racmc {

EncoderParams::EncoderParams(const DataDims& dims, Index n_common, Rng& rng)
    : W_text_fine(uniform_param(dims.n1, n_common, rng)),
      b_text_fine(zero_param(1, n_common)),
      W_image_fine(uniform_param(dims.n2, n_common, rng)),
      b_image_fine(zero_param(1, n_common)),
      W_text_coarse(uniform_param(dims.n_raw, n_common, rng)),
      b_text_coarse(zero_param(1, n_common)),
      W_image_coarse(uniform_param(dims.n_raw, n_common, rng)),
      b_image_coarse(zero_param(1, n_common)) {}

void EncoderParams::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".W_text_fine", W_text_fine);
  out.emplace_back(prefix + ".b_text_fine", b_text_fine);
  out.emplace_back(prefix + ".W_image_fine", W_image_fine);
  out.emplace_back(prefix + ".b_image_fine", b_image_fine);
  out.emplace_back(prefix + ".W_text_coarse", W_text_coarse);
  out.emplace_back(prefix + ".b_text_coarse", b_text_coarse);
  out.emplace_back(prefix + ".W_image_coarse", W_image_coarse);
  out.emplace_back(prefix + ".b_image_coarse", b_image_coarse);
}

namespace {

Matrix block_matrix(std::span<const NewsRecord> records,
                    std::vector<float> NewsRecord::*field, Index width,
                    const char* name) {
  Matrix m(static_cast<Index>(records.size()), width);
  for (std::size_t r = 0; r < records.size(); ++r) {
    const std::vector<float>& v = records[r].*field;
    if (static_cast<Index>(v.size()) != width)
      throw data_error("encode_batch: record " + records[r].id + " has " + name + " length " +
                       std::to_string(v.size()) + ", expected " + std::to_string(width));
    for (Index j = 0; j < width; ++j)
      m(static_cast<Index>(r), j) = static_cast<double>(v[static_cast<std::size_t>(j)]);
  }
  return m;
}

}  // namespace

EncodedBatch encode_batch(std::span<const NewsRecord> records, const EncoderParams& params) {
  if (records.empty()) throw data_error("encode_batch: empty batch");
  const Index n1 = params.W_text_fine.rows();
  const Index n2 = params.W_image_fine.rows();
  const Index n_raw = params.W_text_coarse.rows();

  EncodedBatch out;
  out.text_fine_raw = Tensor(block_matrix(records, &NewsRecord::text_fine, n1, "text_fine"));
  out.image_fine_raw = Tensor(block_matrix(records, &NewsRecord::image_fine, n2, "image_fine"));
  Tensor tc_raw(block_matrix(records, &NewsRecord::text_coarse, n_raw, "text_coarse"));
  Tensor ic_raw(block_matrix(records, &NewsRecord::image_coarse, n_raw, "image_coarse"));

  out.text_fine = linear(out.text_fine_raw, params.W_text_fine, params.b_text_fine);
  out.image_fine = linear(out.image_fine_raw, params.W_image_fine, params.b_image_fine);
  out.text_coarse = linear(tc_raw, params.W_text_coarse, params.b_text_coarse);
  out.image_coarse = linear(ic_raw, params.W_image_coarse, params.b_image_coarse);

  out.labels.reserve(records.size());
  for (const NewsRecord& r : records) out.labels.push_back(r.label);
  return out;
}

}  // namespace racmc
