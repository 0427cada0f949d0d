#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "ocan/params.hpp"
#include "ocan/tensor.hpp"

namespace ocan {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while its
// tape is alive.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const;
  Tensor tensor() const { return Tensor(value()); }
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records a computation as it executes so that backward() can push
// d(loss)/d(node) back to every ParamGroup entry bound with param().
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(const Tensor& value) { return constant(value.matrix()); }
  // Binds a trainable parameter. Gradients land in group[index].grad.
  Var param(ParamGroup& group, std::size_t index);
  Var param(ParamGroup& group, std::string_view name) { return param(group, group.index_of(name)); }
  // Binds every entry of `group` in order; as constants when !trainable.
  std::vector<Var> bind(ParamGroup& group, bool trainable);

  // loss must be 1×1. Accumulates (adds) into the bound parameter gradients.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Op-author interface.
  Var record(Matrix value, bool requires_grad, BackwardFn fn, std::string_view op);
  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  void accumulate(std::size_t id, const Matrix& grad);
  // Adds `grad` into the block of node `id` starting at (row, col).
  void accumulate_block(std::size_t id, Index row, Index col, const Matrix& grad);
  template <typename Expr>
  void accumulate_expr(std::size_t id, const Expr& grad) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = grad;
    } else {
      n.grad += grad;
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
    ParamGroup* group = nullptr;
    std::size_t param_index = 0;
  };
  std::vector<Node> nodes_;
};

// Differentiable primitives. Binary elementwise ops accept equal shapes, a
// 1×n row broadcast over rows of the left operand, or a 1×1 scalar.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var log(Var a);  // throws NumericError on any entry <= 0
Var square(Var a);
Var sqrt(Var a);
Var clamp(Var a, double lo, double hi);  // zero gradient where clipped
Var sum(Var a);                          // 1×1
Var mean(Var a);                         // 1×1
Var col_mean(Var a);                     // n×m -> 1×m
Var row_sum(Var a);                      // n×m -> n×1
Var row_softmax(Var a);
Var row_l2_norm(Var a, double floor = 0.0);  // n×m -> n×1, max(||row||, floor)
Var l2_norm(Var a);                          // Frobenius norm, 1×1
Var div_rows(Var a, Var col);                // a(i,:) / col(i)
Var transpose(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, Index begin, Index count);
Var slice_cols(Var a, Index begin, Index count);
// out.row(k) = a.row(rows[k]); repeated indices are allowed.
Var gather_rows(Var a, std::vector<Index> rows);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, double s) { return scale(a, s); }

}  // namespace ocan
