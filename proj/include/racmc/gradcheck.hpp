#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "racmc/tensor.hpp"

namespace racmc {

// Max over elements of |analytic - central_difference| / max(1, |analytic|)
// for a scalar-valued f at x. f must be pure and smooth at x (callers keep
// inputs away from abs/relu/sqrt kinks and mask thresholds).
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h = 1e-5);

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

// Multi-tensor variant: `loss` recomputes the scalar objective from current
// parameter values; each listed tensor is perturbed in place for the numeric
// side. Returns the worst error; per-tensor results go to `entries` if given.
double grad_check_params(const std::function<Tensor()>& loss,
                         const std::vector<std::pair<std::string, Tensor>>& params,
                         double h = 1e-5, std::vector<GradCheckEntry>* entries = nullptr);

}  // namespace racmc
