#pragma once

#include <vector>

#include "racmc/tensor.hpp"

namespace racmc {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Matrix m;  // first moment
  Matrix v;  // second moment, elementwise >= 0
  long t = 0;
  AdamConfig hp;

  AdamState() = default;
  AdamState(Index rows, Index cols, AdamConfig cfg)
      : m(Matrix::Zero(rows, cols)), v(Matrix::Zero(rows, cols)), hp(cfg) {}
};

// One bias-corrected Adam update in place. The parameter must carry a gradient.
void adam_step(Tensor& param, AdamState& state);

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  // Updates every parameter that accumulated a gradient this step.
  void step();
  void zero_grad();

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> states_;
};

}  // namespace racmc
