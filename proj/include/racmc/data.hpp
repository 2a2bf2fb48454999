#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "racmc/rng.hpp"
#include "racmc/tensor.hpp"

namespace racmc {

inline constexpr int kLabelFake = 0;
inline constexpr int kLabelReal = 1;

// One news item as four precomputed feature blocks. Fine-grained blocks have
// modality-specific widths; coarse blocks share the joint-embedding width.
// Values are f32 to match the on-disk format exactly.
struct NewsRecord {
  std::string id;
  int label = kLabelFake;  // fake=0, real=1
  std::vector<float> text_fine;    // length n1
  std::vector<float> text_coarse;  // length n_raw
  std::vector<float> image_fine;   // length n2
  std::vector<float> image_coarse; // length n_raw
};

struct DataDims {
  Index n1 = 24;     // fine-grained text width
  Index n2 = 32;     // fine-grained image width
  Index n_raw = 16;  // coarse (joint-embedding) width before projection
};

struct Dataset {
  DataDims dims;
  std::vector<NewsRecord> records;
};

// Synthetic paired-feature generator. Real records sit at +delta along a
// fixed unit direction per block, fake at -delta. Within a record, text and
// image blocks share latent noise mixed with weight rho, so matched pairs are
// more similar than mismatched ones when rho is large.
struct SynthConfig {
  Index real_count = 200;
  Index fake_count = 200;
  DataDims dims;
  Index n_common = 16;     // projection target width N (carried for manifests)
  double delta = 1.0;      // class separation along the block direction
  double rho = 0.5;        // text/image latent coupling in [0,1]
  double sigma_noise = 1.0;
  std::uint64_t seed = 0;
};

std::vector<NewsRecord> synth_generate(const SynthConfig& cfg);

// Binary embedding file, little-endian:
//   magic "RCMC", u32 version=1, u32 n1, u32 n2, u32 n_raw, u64 record count;
//   per record: u16 id length, id bytes, u8 label, then f32 arrays
//   text_fine[n1], text_coarse[n_raw], image_fine[n2], image_coarse[n_raw].
void write_embeddings(const std::string& path, const Dataset& data);
Dataset load_embeddings(const std::string& path);

}  // namespace racmc
