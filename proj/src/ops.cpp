#include "racmc/ops.hpp"

#include <cmath>
#include <string>

namespace racmc {

namespace {

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw shape_error(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

bool grad_path(std::initializer_list<const Tensor*> ins) {
  if (!Tape::active()) return false;
  for (const Tensor* t : ins)
    if (t->requires_grad()) return true;
  return false;
}

using NodePtr = Tape::NodePtr;

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  const bool rg = grad_path({&a, &b});
  Tensor out(a.value() + b.value(), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, bn = b.node, on = out.node](Tape& t) {
      if (an->requires_grad) t.touch(an) += on->adjoint;
      if (bn->requires_grad) t.touch(bn) += on->adjoint;
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  const bool rg = grad_path({&a, &b});
  Tensor out(a.value() - b.value(), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, bn = b.node, on = out.node](Tape& t) {
      if (an->requires_grad) t.touch(an) += on->adjoint;
      if (bn->requires_grad) t.touch(bn) -= on->adjoint;
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  const bool rg = grad_path({&a, &b});
  Tensor out(a.value().cwiseProduct(b.value()), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, bn = b.node, on = out.node](Tape& t) {
      if (an->requires_grad) t.touch(an) += on->adjoint.cwiseProduct(bn->value);
      if (bn->requires_grad) t.touch(bn) += on->adjoint.cwiseProduct(an->value);
    });
  }
  return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape("div", a, b);
  const bool rg = grad_path({&a, &b});
  Tensor out(a.value().cwiseQuotient(b.value()), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, bn = b.node, on = out.node](Tape& t) {
      if (an->requires_grad) t.touch(an) += on->adjoint.cwiseQuotient(bn->value);
      if (bn->requires_grad)
        t.touch(bn) -= on->adjoint.cwiseProduct(on->value).cwiseQuotient(bn->value);
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double s) {
  const bool rg = grad_path({&a});
  Tensor out(Matrix(a.value().array() + s), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, on = out.node](Tape& t) {
      t.touch(an) += on->adjoint;
    });
  }
  return out;
}

Tensor mul_scalar(const Tensor& a, double s) {
  const bool rg = grad_path({&a});
  Tensor out(Matrix(a.value() * s), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, on = out.node, s](Tape& t) {
      t.touch(an) += on->adjoint * s;
    });
  }
  return out;
}

Tensor abs(const Tensor& a) {
  const bool rg = grad_path({&a});
  Tensor out(Matrix(a.value().array().abs()), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, on = out.node](Tape& t) {
      // sign with sign(0) = 0, giving the documented subgradient at the kink
      Matrix sign = an->value.array().sign();
      t.touch(an) += on->adjoint.cwiseProduct(sign);
    });
  }
  return out;
}

Tensor relu(const Tensor& a) {
  const bool rg = grad_path({&a});
  Tensor out(Matrix(a.value().array().max(0.0)), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, on = out.node](Tape& t) {
      Matrix mask = (an->value.array() > 0.0).cast<double>();
      t.touch(an) += on->adjoint.cwiseProduct(mask);
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& a) {
  const bool rg = grad_path({&a});
  // Stable in both tails: 1/(1+e^-x) for x>=0, e^x/(1+e^x) for x<0.
  Matrix y = a.value().unaryExpr([](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  Tensor out(std::move(y), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, on = out.node](Tape& t) {
      Matrix d = on->value.array() * (1.0 - on->value.array());
      t.touch(an) += on->adjoint.cwiseProduct(d);
    });
  }
  return out;
}

Tensor exp(const Tensor& a) {
  const bool rg = grad_path({&a});
  Tensor out(Matrix(a.value().array().exp()), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, on = out.node](Tape& t) {
      t.touch(an) += on->adjoint.cwiseProduct(on->value);
    });
  }
  return out;
}

Tensor log(const Tensor& a, double floor) {
  const bool rg = grad_path({&a});
  Tensor out(Matrix(a.value().array().max(floor).log()), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, on = out.node, floor](Tape& t) {
      Matrix d = an->value.unaryExpr([floor](double x) { return x > floor ? 1.0 / x : 0.0; });
      t.touch(an) += on->adjoint.cwiseProduct(d);
    });
  }
  return out;
}

Tensor sqrt(const Tensor& a) {
  const bool rg = grad_path({&a});
  Tensor out(Matrix(a.value().array().max(0.0).sqrt()), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, on = out.node](Tape& t) {
      Matrix d = on->value.unaryExpr([](double y) { return y > 0.0 ? 0.5 / y : 0.0; });
      t.touch(an) += on->adjoint.cwiseProduct(d);
    });
  }
  return out;
}

Tensor step_ge(const Tensor& a, const Tensor& b) {
  check_same_shape("step_ge", a, b);
  return Tensor(Matrix((a.value().array() >= b.value().array()).cast<double>()), false);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw shape_error("matmul: inner dimensions disagree, " + shape_str(a) + " * " + shape_str(b));
  const bool rg = grad_path({&a, &b});
  Tensor out(Matrix(a.value() * b.value()), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, bn = b.node, on = out.node](Tape& t) {
      if (an->requires_grad) t.touch(an) += on->adjoint * bn->value.transpose();
      if (bn->requires_grad) t.touch(bn) += an->value.transpose() * on->adjoint;
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  const bool rg = grad_path({&a});
  Tensor out(Matrix(a.value().transpose()), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, on = out.node](Tape& t) {
      t.touch(an) += on->adjoint.transpose();
    });
  }
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows())
    throw shape_error("concat_cols: row counts disagree, " + shape_str(a) + " vs " + shape_str(b));
  const bool rg = grad_path({&a, &b});
  Matrix m(a.rows(), a.cols() + b.cols());
  m.leftCols(a.cols()) = a.value();
  m.rightCols(b.cols()) = b.value();
  Tensor out(std::move(m), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, bn = b.node, on = out.node](Tape& t) {
      const Index ac = an->value.cols();
      const Index bc = bn->value.cols();
      if (an->requires_grad) t.touch(an) += on->adjoint.leftCols(ac);
      if (bn->requires_grad) t.touch(bn) += on->adjoint.rightCols(bc);
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& a, Index first, Index count) {
  if (first < 0 || count < 0 || first + count > a.cols())
    throw shape_error("slice_cols: [" + std::to_string(first) + "," +
                      std::to_string(first + count) + ") out of range for " + shape_str(a));
  const bool rg = grad_path({&a});
  Tensor out(Matrix(a.value().middleCols(first, count)), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, on = out.node, first, count](Tape& t) {
      t.touch(an).middleCols(first, count) += on->adjoint;
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& a, const std::vector<Index>& idx) {
  for (Index i : idx)
    if (i < 0 || i >= a.rows())
      throw shape_error("gather_rows: index " + std::to_string(i) + " out of range for " +
                        shape_str(a));
  const bool rg = grad_path({&a});
  Matrix m(static_cast<Index>(idx.size()), a.cols());
  for (Index k = 0; k < m.rows(); ++k) m.row(k) = a.value().row(idx[static_cast<std::size_t>(k)]);
  Tensor out(std::move(m), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, on = out.node, idx](Tape& t) {
      Matrix& adj = t.touch(an);
      for (Index k = 0; k < on->adjoint.rows(); ++k)
        adj.row(idx[static_cast<std::size_t>(k)]) += on->adjoint.row(k);
    });
  }
  return out;
}

Tensor reshape(const Tensor& a, Index rows, Index cols) {
  if (rows * cols != a.numel())
    throw shape_error("reshape: cannot view " + shape_str(a) + " as " + std::to_string(rows) +
                      "x" + std::to_string(cols));
  const bool rg = grad_path({&a});
  Tensor out(Matrix(Eigen::Map<const Matrix>(a.value().data(), rows, cols)), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, on = out.node](Tape& t) {
      t.touch(an) += Eigen::Map<const Matrix>(on->adjoint.data(), an->value.rows(),
                                              an->value.cols());
    });
  }
  return out;
}

Tensor broadcast_row(const Tensor& v, Index rows) {
  if (v.rows() != 1) throw shape_error("broadcast_row: expected 1xq, got " + shape_str(v));
  const bool rg = grad_path({&v});
  Tensor out(Matrix(v.value().replicate(rows, 1)), rg);
  if (rg) {
    Tape::active()->record(out.node, [vn = v.node, on = out.node](Tape& t) {
      t.touch(vn) += on->adjoint.colwise().sum();
    });
  }
  return out;
}

Tensor broadcast_col(const Tensor& v, Index cols) {
  if (v.cols() != 1) throw shape_error("broadcast_col: expected px1, got " + shape_str(v));
  const bool rg = grad_path({&v});
  Tensor out(Matrix(v.value().replicate(1, cols)), rg);
  if (rg) {
    Tape::active()->record(out.node, [vn = v.node, on = out.node](Tape& t) {
      t.touch(vn) += on->adjoint.rowwise().sum();
    });
  }
  return out;
}

Tensor sum_all(const Tensor& a) {
  const bool rg = grad_path({&a});
  Tensor out(Matrix::Constant(1, 1, a.value().sum()), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, on = out.node](Tape& t) {
      t.touch(an).array() += on->adjoint(0, 0);
    });
  }
  return out;
}

Tensor row_sums(const Tensor& a) {
  const bool rg = grad_path({&a});
  Tensor out(Matrix(a.value().rowwise().sum()), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, on = out.node](Tape& t) {
      t.touch(an) += on->adjoint.replicate(1, an->value.cols());
    });
  }
  return out;
}

Tensor col_sums(const Tensor& a) {
  const bool rg = grad_path({&a});
  Tensor out(Matrix(a.value().colwise().sum()), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, on = out.node](Tape& t) {
      t.touch(an) += on->adjoint.replicate(an->value.rows(), 1);
    });
  }
  return out;
}

Tensor mean_all(const Tensor& a) {
  if (a.numel() == 0) throw shape_error("mean_all: empty tensor");
  return mul_scalar(sum_all(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor softmax_rows(const Tensor& a) {
  if (a.cols() < 1) throw shape_error("softmax_rows: needs at least one column");
  const bool rg = grad_path({&a});
  Matrix y(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    const double m = a.value().row(i).maxCoeff();
    Eigen::ArrayXd e = (a.value().row(i).array() - m).exp();
    y.row(i) = (e / e.sum()).matrix();
  }
  Tensor out(std::move(y), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, on = out.node](Tape& t) {
      // dx = y * (g - rowwise_sum(g * y))
      Matrix gy = on->adjoint.cwiseProduct(on->value);
      Matrix s = gy.rowwise().sum();
      t.touch(an) +=
          on->value.cwiseProduct(on->adjoint - s.replicate(1, on->value.cols()));
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& W, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != W.cols())
    throw shape_error("linear: bias " + shape_str(bias) + " does not match W " + shape_str(W));
  return add(matmul(x, W), broadcast_row(bias, x.rows()));
}

Tensor frobenius_norm(const Tensor& a) { return sqrt(sum_all(mul(a, a))); }

Tensor dropout(const Tensor& a, double rate, const Mode& mode, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw config_error("dropout: rate must be in [0,1), got " + std::to_string(rate));
  if (!mode.dropout || rate == 0.0) return a;
  const double keep = 1.0 - rate;
  Matrix mask(a.rows(), a.cols());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) mask(i, j) = u(rng) >= rate ? 1.0 / keep : 0.0;
  const bool rg = grad_path({&a});
  Tensor out(a.value().cwiseProduct(mask), rg);
  if (rg) {
    Tape::active()->record(out.node, [an = a.node, on = out.node, mask](Tape& t) {
      t.touch(an) += on->adjoint.cwiseProduct(mask);
    });
  }
  return out;
}

BatchNorm::BatchNorm(Index q, double gamma_init)
    : gamma(Matrix::Constant(1, q, gamma_init), true),
      beta(Matrix::Zero(1, q), true),
      running_mean(Matrix::Zero(1, q)),
      running_var(Matrix::Ones(1, q)) {}

Tensor BatchNorm::forward(const Tensor& x, const Mode& mode) {
  if (x.cols() != gamma.cols())
    throw shape_error("batch_norm: input has " + std::to_string(x.cols()) +
                      " columns, layer expects " + std::to_string(gamma.cols()));
  const Index p = x.rows();
  Tensor xhat;
  switch (mode.bn) {
    case BnMode::train: {
      if (p < 2)
        throw contract_error("batch_norm: train mode needs a batch of at least 2 rows, got " +
                             std::to_string(p));
      Tensor mu = mul_scalar(col_sums(x), 1.0 / static_cast<double>(p));
      Tensor xc = sub(x, broadcast_row(mu, p));
      Tensor var = mul_scalar(col_sums(mul(xc, xc)), 1.0 / static_cast<double>(p));
      Tensor inv_std = div(Tensor(Matrix::Ones(1, x.cols())), sqrt(add_scalar(var, eps)));
      xhat = mul(xc, broadcast_row(inv_std, p));
      running_mean = (1.0 - momentum) * running_mean + momentum * mu.value();
      running_var = (1.0 - momentum) * running_var + momentum * var.value();
      break;
    }
    case BnMode::eval: {
      Matrix inv = (running_var.array() + eps).rsqrt();
      Tensor shift{Matrix(running_mean)};
      Tensor scale{Matrix(inv)};
      xhat = mul(sub(x, broadcast_row(shift, p)), broadcast_row(scale, p));
      break;
    }
    case BnMode::bypass:
      xhat = x;
      break;
  }
  return add(mul(xhat, broadcast_row(gamma, p)), broadcast_row(beta, p));
}

}  // namespace racmc
