#include "ocan/tape.hpp"

#include <cmath>
#include <string>

#include "ocan/errors.hpp"

namespace ocan {

namespace {

Tape& tape_of(Var a, std::string_view op) {
  if (!a.valid()) throw ArgumentError(std::string(op) + ": operand is not bound to a tape");
  return *a.tape();
}

Tape& tape_of(Var a, Var b, std::string_view op) {
  Tape& t = tape_of(a, op);
  if (b.tape() != &t) throw ArgumentError(std::string(op) + ": operands live on different tapes");
  return t;
}

std::string shapes(std::string_view op, Var a, Var b) {
  return std::string(op) + ": incompatible shapes " + shape_str(a.rows(), a.cols()) + " and " +
         shape_str(b.rows(), b.cols());
}

enum class Broadcast { kSame, kRow, kScalar };

Broadcast broadcast_kind(Var a, Var b, std::string_view op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::kSame;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::kScalar;
  throw ShapeError(shapes(op, a, b));
}

Matrix expand(const Matrix& b, Broadcast kind, Index rows, Index cols) {
  switch (kind) {
    case Broadcast::kSame:
      return b;
    case Broadcast::kRow:
      return b.replicate(rows, 1);
    case Broadcast::kScalar:
      return Matrix::Constant(rows, cols, b(0, 0));
  }
  return b;
}

// Sums a full-shape gradient back down to the broadcast operand's shape.
Matrix reduce(const Matrix& g, Broadcast kind) {
  switch (kind) {
    case Broadcast::kSame:
      return g;
    case Broadcast::kRow:
      return g.colwise().sum();
    case Broadcast::kScalar:
      return Matrix::Constant(1, 1, g.sum());
  }
  return g;
}

}  // namespace

const Matrix& Var::value() const {
  if (!valid()) throw ArgumentError("Var is not bound to a tape");
  return tape_->value(id_);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("expected a scalar, got " + shape_str(v.rows(), v.cols()));
  }
  return v(0, 0);
}

bool Var::requires_grad() const { return valid() && tape_->requires_grad(id_); }

Var Tape::constant(Matrix value) {
  return record(std::move(value), false, nullptr, "constant");
}

Var Tape::param(ParamGroup& group, std::size_t index) {
  Node n;
  n.value = group[index].value.matrix();
  n.requires_grad = true;
  n.group = &group;
  n.param_index = index;
  if (!n.value.allFinite()) {
    throw NumericError("parameter '" + group[index].name + "' holds non-finite values");
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

std::vector<Var> Tape::bind(ParamGroup& group, bool trainable) {
  std::vector<Var> vars;
  vars.reserve(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    vars.push_back(trainable ? param(group, i) : constant(group[i].value));
  }
  return vars;
}

Var Tape::record(Matrix value, bool requires_grad, BackwardFn fn, std::string_view op) {
  if (!value.allFinite()) throw NumericError(std::string(op) + " produced a non-finite value");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Matrix& grad) { accumulate_expr(id, grad); }

void Tape::accumulate_block(std::size_t id, Index row, Index col, const Matrix& grad) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  n.grad.block(row, col, grad.rows(), grad.cols()) += grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ArgumentError("backward: loss belongs to another tape");
  const Matrix& lv = value(loss.id());
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_str(lv.rows(), lv.cols()));
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad = Matrix::Ones(1, 1);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.group != nullptr) {
      Tensor& g = (*n.group)[n.param_index].grad;
      g.matrix() += n.grad;
      continue;
    }
    if (n.backward) {
      // Copy out so callbacks may accumulate into any node without aliasing.
      const Matrix upstream = std::move(n.grad);
      n.grad.resize(0, 0);
      n.backward(*this, upstream);
    }
  }
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b, "matmul");
  if (a.cols() != b.rows()) throw ShapeError(shapes("matmul", a, b));
  const std::size_t ia = a.id(), ib = b.id();
  Matrix out = a.value() * b.value();
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& t, const Matrix& g) {
                    if (t.requires_grad(ia)) t.accumulate_expr(ia, g * t.value(ib).transpose());
                    if (t.requires_grad(ib)) t.accumulate_expr(ib, t.value(ia).transpose() * g);
                  },
                  "matmul");
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b, "add");
  const Broadcast kind = broadcast_kind(a, b, "add");
  const std::size_t ia = a.id(), ib = b.id();
  Matrix out = a.value() + expand(b.value(), kind, a.rows(), a.cols());
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [ia, ib, kind](Tape& t, const Matrix& g) {
                    t.accumulate(ia, g);
                    if (t.requires_grad(ib)) t.accumulate(ib, reduce(g, kind));
                  },
                  "add");
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b, "sub");
  const Broadcast kind = broadcast_kind(a, b, "sub");
  const std::size_t ia = a.id(), ib = b.id();
  Matrix out = a.value() - expand(b.value(), kind, a.rows(), a.cols());
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [ia, ib, kind](Tape& t, const Matrix& g) {
                    t.accumulate(ia, g);
                    if (t.requires_grad(ib)) t.accumulate(ib, reduce(-g, kind));
                  },
                  "sub");
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b, "mul");
  const Broadcast kind = broadcast_kind(a, b, "mul");
  const std::size_t ia = a.id(), ib = b.id();
  Matrix out = a.value().cwiseProduct(expand(b.value(), kind, a.rows(), a.cols()));
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [ia, ib, kind](Tape& t, const Matrix& g) {
                    const Matrix& av = t.value(ia);
                    const Matrix& bv = t.value(ib);
                    if (t.requires_grad(ia)) {
                      t.accumulate_expr(ia, g.cwiseProduct(expand(bv, kind, av.rows(), av.cols())));
                    }
                    if (t.requires_grad(ib)) t.accumulate(ib, reduce(g.cwiseProduct(av), kind));
                  },
                  "mul");
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a, "scale");
  const std::size_t ia = a.id();
  return t.record(a.value() * s, a.requires_grad(),
                  [ia, s](Tape& t, const Matrix& g) { t.accumulate_expr(ia, g * s); }, "scale");
}

Var add_scalar(Var a, double s) {
  Tape& t = tape_of(a, "add_scalar");
  const std::size_t ia = a.id();
  Matrix out = a.value().array() + s;
  return t.record(std::move(out), a.requires_grad(),
                  [ia](Tape& t, const Matrix& g) { t.accumulate(ia, g); }, "add_scalar");
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a, "sigmoid");
  const std::size_t ia = a.id();
  Matrix out = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  const std::size_t io = t.size();
  return t.record(std::move(out), a.requires_grad(),
                  [ia, io](Tape& t, const Matrix& g) {
                    const auto s = t.value(io).array();
                    t.accumulate_expr(ia, (g.array() * s * (1.0 - s)).matrix());
                  },
                  "sigmoid");
}

Var tanh(Var a) {
  Tape& t = tape_of(a, "tanh");
  const std::size_t ia = a.id();
  Matrix out = a.value().array().tanh();
  const std::size_t io = t.size();
  return t.record(std::move(out), a.requires_grad(),
                  [ia, io](Tape& t, const Matrix& g) {
                    const auto y = t.value(io).array();
                    t.accumulate_expr(ia, (g.array() * (1.0 - y * y)).matrix());
                  },
                  "tanh");
}

Var relu(Var a) {
  Tape& t = tape_of(a, "relu");
  const std::size_t ia = a.id();
  Matrix out = a.value().cwiseMax(0.0);
  return t.record(std::move(out), a.requires_grad(),
                  [ia](Tape& t, const Matrix& g) {
                    const auto x = t.value(ia).array();
                    t.accumulate_expr(ia, (x > 0.0).select(g.array(), 0.0).matrix());
                  },
                  "relu");
}

Var log(Var a) {
  Tape& t = tape_of(a, "log");
  const Matrix& x = a.value();
  if (x.size() > 0 && !(x.minCoeff() > 0.0)) {
    throw NumericError("log of non-positive value (min " + std::to_string(x.minCoeff()) +
                       ") in operand " + shape_str(x.rows(), x.cols()));
  }
  const std::size_t ia = a.id();
  Matrix out = x.array().log();
  return t.record(std::move(out), a.requires_grad(),
                  [ia](Tape& t, const Matrix& g) {
                    t.accumulate_expr(ia, (g.array() / t.value(ia).array()).matrix());
                  },
                  "log");
}

Var square(Var a) {
  Tape& t = tape_of(a, "square");
  const std::size_t ia = a.id();
  Matrix out = a.value().array().square();
  return t.record(std::move(out), a.requires_grad(),
                  [ia](Tape& t, const Matrix& g) {
                    t.accumulate_expr(ia, (2.0 * g.array() * t.value(ia).array()).matrix());
                  },
                  "square");
}

Var sqrt(Var a) {
  Tape& t = tape_of(a, "sqrt");
  const Matrix& x = a.value();
  if (x.size() > 0 && x.minCoeff() < 0.0) throw NumericError("sqrt of negative value");
  const std::size_t ia = a.id();
  Matrix out = x.array().sqrt();
  const std::size_t io = t.size();
  return t.record(std::move(out), a.requires_grad(),
                  [ia, io](Tape& t, const Matrix& g) {
                    t.accumulate_expr(ia, (0.5 * g.array() / t.value(io).array()).matrix());
                  },
                  "sqrt");
}

Var clamp(Var a, double lo, double hi) {
  Tape& t = tape_of(a, "clamp");
  if (!(lo <= hi)) throw ArgumentError("clamp: lo > hi");
  const std::size_t ia = a.id();
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return t.record(std::move(out), a.requires_grad(),
                  [ia, lo, hi](Tape& t, const Matrix& g) {
                    const auto x = t.value(ia).array();
                    t.accumulate_expr(ia, (x >= lo && x <= hi).select(g.array(), 0.0).matrix());
                  },
                  "clamp");
}

Var sum(Var a) {
  Tape& t = tape_of(a, "sum");
  const std::size_t ia = a.id();
  const Index r = a.rows(), c = a.cols();
  return t.record(Matrix::Constant(1, 1, a.value().sum()), a.requires_grad(),
                  [ia, r, c](Tape& t, const Matrix& g) {
                    t.accumulate_expr(ia, Matrix::Constant(r, c, g(0, 0)));
                  },
                  "sum");
}

Var mean(Var a) {
  Tape& t = tape_of(a, "mean");
  const Index r = a.rows(), c = a.cols();
  if (r * c == 0) throw ArgumentError("mean of an empty tensor");
  const std::size_t ia = a.id();
  const double n = static_cast<double>(r * c);
  return t.record(Matrix::Constant(1, 1, a.value().sum() / n), a.requires_grad(),
                  [ia, r, c, n](Tape& t, const Matrix& g) {
                    t.accumulate_expr(ia, Matrix::Constant(r, c, g(0, 0) / n));
                  },
                  "mean");
}

Var col_mean(Var a) {
  Tape& t = tape_of(a, "col_mean");
  const Index r = a.rows();
  if (r == 0) throw ArgumentError("col_mean of a tensor with no rows");
  const std::size_t ia = a.id();
  Matrix out = a.value().colwise().sum() / static_cast<double>(r);
  return t.record(std::move(out), a.requires_grad(),
                  [ia, r](Tape& t, const Matrix& g) {
                    t.accumulate_expr(ia, (g / static_cast<double>(r)).replicate(r, 1));
                  },
                  "col_mean");
}

Var row_sum(Var a) {
  Tape& t = tape_of(a, "row_sum");
  const std::size_t ia = a.id();
  const Index c = a.cols();
  Matrix out = a.value().rowwise().sum();
  return t.record(std::move(out), a.requires_grad(),
                  [ia, c](Tape& t, const Matrix& g) { t.accumulate_expr(ia, g.replicate(1, c)); },
                  "row_sum");
}

Var row_softmax(Var a) {
  Tape& t = tape_of(a, "row_softmax");
  const std::size_t ia = a.id();
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    out.row(i) = (x.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  const std::size_t io = t.size();
  return t.record(std::move(out), a.requires_grad(),
                  [ia, io](Tape& t, const Matrix& g) {
                    const Matrix& y = t.value(io);
                    // dx = y ⊙ (g − <g, y>) per row
                    Matrix dot = g.cwiseProduct(y).rowwise().sum();
                    Matrix dx = y.cwiseProduct(g - dot.replicate(1, y.cols()));
                    t.accumulate(ia, dx);
                  },
                  "row_softmax");
}

Var row_l2_norm(Var a, double floor) {
  Tape& t = tape_of(a, "row_l2_norm");
  const std::size_t ia = a.id();
  Matrix out = a.value().rowwise().norm().cwiseMax(floor);
  const std::size_t io = t.size();
  return t.record(std::move(out), a.requires_grad(),
                  [ia, io, floor](Tape& t, const Matrix& g) {
                    const Matrix& x = t.value(ia);
                    const Matrix& n = t.value(io);
                    Matrix dx = Matrix::Zero(x.rows(), x.cols());
                    for (Index i = 0; i < x.rows(); ++i) {
                      // Clipped rows (norm below the floor) get no gradient.
                      const double raw = x.row(i).norm();
                      if (raw > 0.0 && raw >= floor) dx.row(i) = x.row(i) * (g(i, 0) / n(i, 0));
                    }
                    t.accumulate(ia, dx);
                  },
                  "row_l2_norm");
}

Var l2_norm(Var a) { return sqrt(sum(square(a))); }

Var div_rows(Var a, Var col) {
  Tape& t = tape_of(a, col, "div_rows");
  if (col.cols() != 1 || col.rows() != a.rows()) throw ShapeError(shapes("div_rows", a, col));
  const Matrix& d = col.value();
  if (d.size() > 0 && d.cwiseAbs().minCoeff() == 0.0) throw NumericError("div_rows: division by zero");
  const std::size_t ia = a.id(), ic = col.id();
  Matrix out = a.value().array().colwise() / d.col(0).array();
  return t.record(std::move(out), a.requires_grad() || col.requires_grad(),
                  [ia, ic](Tape& t, const Matrix& g) {
                    const Matrix& x = t.value(ia);
                    const Matrix& d = t.value(ic);
                    if (t.requires_grad(ia)) {
                      t.accumulate_expr(ia, (g.array().colwise() / d.col(0).array()).matrix());
                    }
                    if (t.requires_grad(ic)) {
                      Matrix gd = -(g.cwiseProduct(x).rowwise().sum().array() / d.array().square()).matrix();
                      t.accumulate(ic, gd);
                    }
                  },
                  "div_rows");
}

Var transpose(Var a) {
  Tape& t = tape_of(a, "transpose");
  const std::size_t ia = a.id();
  Matrix out = a.value().transpose();
  return t.record(std::move(out), a.requires_grad(),
                  [ia](Tape& t, const Matrix& g) { t.accumulate_expr(ia, g.transpose()); },
                  "transpose");
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat_cols: no operands");
  Tape& t = tape_of(parts[0], "concat_cols");
  const Index r = parts[0].rows();
  Index c = 0;
  bool grad = false;
  std::vector<std::size_t> ids;
  std::vector<Index> widths;
  for (const Var& p : parts) {
    tape_of(parts[0], p, "concat_cols");
    if (p.rows() != r) throw ShapeError(shapes("concat_cols", parts[0], p));
    c += p.cols();
    grad = grad || p.requires_grad();
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  Matrix out(r, c);
  Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return t.record(std::move(out), grad,
                  [ids, widths](Tape& t, const Matrix& g) {
                    Index off = 0;
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (t.requires_grad(ids[k])) t.accumulate_expr(ids[k], g.middleCols(off, widths[k]));
                      off += widths[k];
                    }
                  },
                  "concat_cols");
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat_rows: no operands");
  Tape& t = tape_of(parts[0], "concat_rows");
  const Index c = parts[0].cols();
  Index r = 0;
  bool grad = false;
  std::vector<std::size_t> ids;
  std::vector<Index> heights;
  for (const Var& p : parts) {
    tape_of(parts[0], p, "concat_rows");
    if (p.cols() != c) throw ShapeError(shapes("concat_rows", parts[0], p));
    r += p.rows();
    grad = grad || p.requires_grad();
    ids.push_back(p.id());
    heights.push_back(p.rows());
  }
  Matrix out(r, c);
  Index off = 0;
  for (const Var& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  return t.record(std::move(out), grad,
                  [ids, heights](Tape& t, const Matrix& g) {
                    Index off = 0;
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (t.requires_grad(ids[k])) t.accumulate_expr(ids[k], g.middleRows(off, heights[k]));
                      off += heights[k];
                    }
                  },
                  "concat_rows");
}

Var slice_rows(Var a, Index begin, Index count) {
  Tape& t = tape_of(a, "slice_rows");
  if (begin < 0 || count < 0 || begin + count > a.rows()) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " +
                     shape_str(a.rows(), a.cols()));
  }
  if (begin == 0 && count == a.rows()) return a;
  const std::size_t ia = a.id();
  Matrix out = a.value().middleRows(begin, count);
  return t.record(std::move(out), a.requires_grad(),
                  [ia, begin](Tape& t, const Matrix& g) { t.accumulate_block(ia, begin, 0, g); },
                  "slice_rows");
}

Var slice_cols(Var a, Index begin, Index count) {
  Tape& t = tape_of(a, "slice_cols");
  if (begin < 0 || count < 0 || begin + count > a.cols()) {
    throw ShapeError("slice_cols: cols [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " +
                     shape_str(a.rows(), a.cols()));
  }
  if (begin == 0 && count == a.cols()) return a;
  const std::size_t ia = a.id();
  Matrix out = a.value().middleCols(begin, count);
  return t.record(std::move(out), a.requires_grad(),
                  [ia, begin](Tape& t, const Matrix& g) { t.accumulate_block(ia, 0, begin, g); },
                  "slice_cols");
}

Var gather_rows(Var a, std::vector<Index> rows) {
  Tape& t = tape_of(a, "gather_rows");
  const Index n = static_cast<Index>(rows.size());
  Matrix out(n, a.cols());
  for (Index k = 0; k < n; ++k) {
    const Index r = rows[static_cast<std::size_t>(k)];
    if (r < 0 || r >= a.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range for " +
                       shape_str(a.rows(), a.cols()));
    }
    out.row(k) = a.value().row(r);
  }
  const std::size_t ia = a.id();
  return t.record(std::move(out), a.requires_grad(),
                  [ia, rows = std::move(rows)](Tape& t, const Matrix& g) {
                    Matrix acc = Matrix::Zero(t.value(ia).rows(), g.cols());
                    for (std::size_t k = 0; k < rows.size(); ++k) {
                      acc.row(rows[k]) += g.row(static_cast<Index>(k));
                    }
                    t.accumulate(ia, acc);
                  },
                  "gather_rows");
}

}  // namespace ocan
