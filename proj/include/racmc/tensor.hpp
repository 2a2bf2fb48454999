#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "racmc/errors.hpp"

namespace racmc {

using Index = Eigen::Index;
// Row-major doubles throughout; every quantity in the pipeline is a matrix
// (scalars are 1x1, row vectors 1xq).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tensor;
// Named views over a module's learnable tensors / non-learnable buffers, used
// by the optimizer and the snapshot format.
using NamedParams = std::vector<std::pair<std::string, Tensor>>;
using NamedBuffers = std::vector<std::pair<std::string, Matrix*>>;

struct TensorNode {
  Matrix value;
  Matrix grad;                      // accumulated d(loss)/d(this); empty until first backward
  Matrix adjoint;                   // per-backward-pass scratch
  std::uint64_t adjoint_pass = 0;   // pass id for which `adjoint` is current
  bool requires_grad = false;
};

// Shared-handle tensor: copies alias the same node, like the underlying
// storage of an autodiff graph edge. Values are immutable once recorded on a
// tape; only the optimizer writes through mutable_value() between steps.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false)
      : node(std::make_shared<TensorNode>()) {
    node->value = std::move(value);
    node->requires_grad = requires_grad;
  }

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false) {
    return Tensor(Matrix::Zero(rows, cols), requires_grad);
  }
  static Tensor full(Index rows, Index cols, double v, bool requires_grad = false) {
    return Tensor(Matrix::Constant(rows, cols, v), requires_grad);
  }
  static Tensor scalar(double v, bool requires_grad = false) {
    return full(1, 1, v, requires_grad);
  }
  static Tensor of(std::initializer_list<std::initializer_list<double>> rows,
                   bool requires_grad = false) {
    const Index r = static_cast<Index>(rows.size());
    const Index c = r > 0 ? static_cast<Index>(rows.begin()->size()) : 0;
    Matrix m(r, c);
    Index i = 0;
    for (const auto& row : rows) {
      if (static_cast<Index>(row.size()) != c)
        throw shape_error("Tensor::of: ragged rows");
      Index j = 0;
      for (double v : row) m(i, j++) = v;
      ++i;
    }
    return Tensor(std::move(m), requires_grad);
  }
  static Tensor row(std::initializer_list<double> vals, bool requires_grad = false) {
    Matrix m(1, static_cast<Index>(vals.size()));
    Index j = 0;
    for (double v : vals) m(0, j++) = v;
    return Tensor(std::move(m), requires_grad);
  }

  bool defined() const { return node != nullptr; }
  const Matrix& value() const { return node->value; }
  // Optimizer / gradient-check access only; never call while a tape holding
  // this tensor is still to be walked.
  Matrix& mutable_value() { return node->value; }

  Index rows() const { return node->value.rows(); }
  Index cols() const { return node->value.cols(); }
  Index numel() const { return node->value.size(); }

  bool requires_grad() const { return node && node->requires_grad; }
  void set_requires_grad(bool rg) { node->requires_grad = rg; }

  bool has_grad() const { return node && node->grad.size() > 0; }
  const Matrix& grad() const {
    if (!has_grad()) throw contract_error("Tensor::grad: no gradient accumulated");
    return node->grad;
  }
  void zero_grad() {
    if (node) node->grad = Matrix::Zero(node->value.rows(), node->value.cols());
  }
  void clear_grad() {
    if (node) node->grad.resize(0, 0);
  }

  double item() const {
    if (rows() != 1 || cols() != 1)
      throw contract_error("Tensor::item: tensor is not a scalar");
    return node->value(0, 0);
  }

  std::shared_ptr<TensorNode> node;
};

// Reverse-mode tape. Operations append records in execution (hence
// topological) order; backward() walks them exactly once in reverse.
//
// Each backward pass uses fresh per-pass adjoints and then adds them into the
// persistent node->grad, so running backward twice on the same tape without
// zeroing doubles every gradient exactly.
class Tape {
 public:
  using NodePtr = std::shared_ptr<TensorNode>;
  using BackwardFn = std::function<void(Tape&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // RAII activation: ops record onto the innermost active tape.
  class Scope {
   public:
    explicit Scope(Tape& t) : prev_(active_) { active_ = &t; }
    ~Scope() { active_ = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* prev_;
  };

  static Tape* active() { return active_; }

  void record(NodePtr output, BackwardFn back) {
    records_.push_back({std::move(output), std::move(back)});
  }

  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

  // Adjoint of `n` for the pass in flight, zeroed on first touch.
  Matrix& touch(const NodePtr& n) {
    if (n->adjoint_pass != pass_) {
      n->adjoint = Matrix::Zero(n->value.rows(), n->value.cols());
      n->adjoint_pass = pass_;
      touched_.push_back(n);
    }
    return n->adjoint;
  }

  void backward(const Tensor& loss) {
    if (!loss.defined())
      throw contract_error("backward: loss tensor is undefined");
    if (loss.rows() != 1 || loss.cols() != 1)
      throw contract_error("backward: loss must be scalar, got " +
                           std::to_string(loss.rows()) + "x" + std::to_string(loss.cols()));
    ++pass_;
    touched_.clear();
    touch(loss.node)(0, 0) = 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      if (it->output->adjoint_pass != pass_) continue;  // not on the path to loss
      it->back(*this);
    }
    for (const auto& n : touched_) {
      if (!n->requires_grad) continue;
      if (n->grad.size() == 0) n->grad = Matrix::Zero(n->value.rows(), n->value.cols());
      n->grad += n->adjoint;
    }
  }

 private:
  struct Record {
    NodePtr output;
    BackwardFn back;
  };

  std::vector<Record> records_;
  std::vector<NodePtr> touched_;
  std::uint64_t pass_ = 0;

  static thread_local Tape* active_;
};

}  // namespace racmc
