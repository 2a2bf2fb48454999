#include "racmc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace racmc {

namespace {

double max_rel_err(const Matrix& analytic, const Matrix& numeric) {
  double worst = 0.0;
  for (Index i = 0; i < analytic.rows(); ++i)
    for (Index j = 0; j < analytic.cols(); ++j) {
      const double a = analytic(i, j);
      const double err = std::fabs(a - numeric(i, j)) / std::max(1.0, std::fabs(a));
      worst = std::max(worst, err);
    }
  return worst;
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h) {
  x.set_requires_grad(true);
  x.zero_grad();
  Tape tape;
  {
    Tape::Scope scope(tape);
    Tensor loss = f(x);
    tape.backward(loss);
  }
  Matrix analytic = x.grad();

  Matrix numeric(x.rows(), x.cols());
  Matrix& xv = x.mutable_value();
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) {
      const double orig = xv(i, j);
      xv(i, j) = orig + h;
      const double fp = f(x).item();
      xv(i, j) = orig - h;
      const double fm = f(x).item();
      xv(i, j) = orig;
      numeric(i, j) = (fp - fm) / (2.0 * h);
    }
  return max_rel_err(analytic, numeric);
}

double grad_check_params(const std::function<Tensor()>& loss,
                         const std::vector<std::pair<std::string, Tensor>>& params,
                         double h, std::vector<GradCheckEntry>* entries) {
  for (const auto& [name, p] : params) {
    Tensor t = p;
    t.zero_grad();
  }
  Tape tape;
  {
    Tape::Scope scope(tape);
    Tensor l = loss();
    tape.backward(l);
  }

  double worst = 0.0;
  for (const auto& [name, p] : params) {
    Tensor t = p;
    Matrix analytic =
        t.has_grad() ? t.grad() : Matrix(Matrix::Zero(t.rows(), t.cols()));
    Matrix numeric(t.rows(), t.cols());
    Matrix& v = t.mutable_value();
    for (Index i = 0; i < t.rows(); ++i)
      for (Index j = 0; j < t.cols(); ++j) {
        const double orig = v(i, j);
        v(i, j) = orig + h;
        const double fp = loss().item();
        v(i, j) = orig - h;
        const double fm = loss().item();
        v(i, j) = orig;
        numeric(i, j) = (fp - fm) / (2.0 * h);
      }
    const double err = max_rel_err(analytic, numeric);
    if (entries) entries->push_back({name, err});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace racmc
