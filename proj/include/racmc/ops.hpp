#pragma once

#include <vector>

#include "racmc/rng.hpp"
#include "racmc/tensor.hpp"

namespace racmc {

// Forward-pass behavior switches. The three knobs are independent so tests
// can isolate each train/eval divergence (dropout, batch-norm statistics,
// soft vs hard attention mask).
enum class BnMode { train, eval, bypass };

struct Mode {
  BnMode bn = BnMode::eval;
  bool dropout = false;    // sample dropout masks
  bool soft_mask = false;  // sigmoid-relaxed attention mask instead of hard 0/1
  double mask_tau = 0.1;   // relaxation temperature

  static Mode train(double tau = 0.1) { return Mode{BnMode::train, true, true, tau}; }
  static Mode eval() { return Mode{}; }
  // Differentiable-everywhere configuration for gradient checks: running-stat
  // normalization, no dropout, soft mask.
  static Mode smooth(double tau = 0.1) { return Mode{BnMode::eval, false, true, tau}; }
};

// ---- elementwise & scalar ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // Hadamard product
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor abs(const Tensor& a);      // subgradient 0 at 0
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
// Natural log with the argument clamped at `floor`; subgradient 0 inside the
// clamped region.
Tensor log(const Tensor& a, double floor = 1e-12);
// Elementwise sqrt; inputs are expected nonnegative, derivative at 0 taken as 0.
Tensor sqrt(const Tensor& a);
// Detached elementwise indicator a >= b. Output never requires grad.
Tensor step_ge(const Tensor& a, const Tensor& b);

// ---- structural ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, Index first, Index count);
Tensor gather_rows(const Tensor& a, const std::vector<Index>& idx);
Tensor reshape(const Tensor& a, Index rows, Index cols);
Tensor broadcast_row(const Tensor& v, Index rows);  // [1xq] -> [rows x q]
Tensor broadcast_col(const Tensor& v, Index cols);  // [px1] -> [p x cols]

// ---- reductions ----
Tensor sum_all(const Tensor& a);   // -> [1x1]
Tensor row_sums(const Tensor& a);  // -> [px1]
Tensor col_sums(const Tensor& a);  // -> [1xq]
Tensor mean_all(const Tensor& a);  // -> [1x1]

// ---- composites ----
// Rows renormalized through a numerically safe softmax (max subtraction).
Tensor softmax_rows(const Tensor& a);
// x [pxq] * W [qxr] + bias [1xr] broadcast over rows.
Tensor linear(const Tensor& x, const Tensor& W, const Tensor& bias);
// sqrt(sum of squares) of all entries -> [1x1].
Tensor frobenius_norm(const Tensor& a);

// Inverted dropout: zero with probability `rate`, scale survivors by
// 1/(1-rate). Identity when mode.dropout is off. rate must be in [0,1).
Tensor dropout(const Tensor& a, double rate, const Mode& mode, Rng& rng);

// Per-column batch normalization with learnable scale/shift and running
// statistics for eval mode. Train mode differentiates through the batch
// statistics and needs at least 2 rows. bypass applies scale/shift only.
struct BatchNorm {
  Tensor gamma;  // [1xq]
  Tensor beta;   // [1xq]
  Matrix running_mean;
  Matrix running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  BatchNorm() = default;
  explicit BatchNorm(Index q, double gamma_init = 1.0);
  Tensor forward(const Tensor& x, const Mode& mode);

  void collect(const std::string& prefix, NamedParams& out) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
  }
  void collect_buffers(const std::string& prefix, NamedBuffers& out) {
    out.emplace_back(prefix + ".running_mean", &running_mean);
    out.emplace_back(prefix + ".running_var", &running_var);
  }
};

// ---- sugar ----
inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return mul_scalar(a, -1.0); }

}  // namespace racmc
