#pragma once

#include <cmath>

#include "racmc/rng.hpp"
#include "racmc/tensor.hpp"

namespace racmc {

// Learnable-weight init: uniform in +-1/sqrt(fan_in), fan_in = rows of W for
// the x*W convention used everywhere.
inline Tensor uniform_param(Index rows, Index cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return Tensor(std::move(m), true);
}

inline Tensor zero_param(Index rows, Index cols) {
  return Tensor(Matrix::Zero(rows, cols), true);
}

}  // namespace racmc
