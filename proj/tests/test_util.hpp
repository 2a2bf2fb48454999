#pragma once

#include <random>

#include "racmc/encoder.hpp"
#include "racmc/tensor.hpp"

namespace racmc::testutil {

inline Matrix random_matrix(Index r, Index c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

// Hand-built batch with independent random blocks and alternating labels.
inline EncodedBatch make_batch(Index b, Index n1, Index n2, Index n, Rng& rng) {
  EncodedBatch batch;
  batch.text_fine_raw = Tensor(random_matrix(b, n1, rng));
  batch.image_fine_raw = Tensor(random_matrix(b, n2, rng));
  batch.text_fine = Tensor(random_matrix(b, n, rng));
  batch.text_coarse = Tensor(random_matrix(b, n, rng));
  batch.image_fine = Tensor(random_matrix(b, n, rng));
  batch.image_coarse = Tensor(random_matrix(b, n, rng));
  for (Index i = 0; i < b; ++i) batch.labels.push_back(static_cast<int>(i % 2));
  return batch;
}

}  // namespace racmc::testutil
