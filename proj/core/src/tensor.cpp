#include "ocan/tensor.hpp"

#include <cstring>

#include "ocan/errors.hpp"

namespace ocan {

Tensor::Tensor(Index rows, Index cols) : m_(Matrix::Zero(rows, cols)) {
  if (rows < 0 || cols < 0) throw ShapeError("negative tensor dimension " + ocan::shape_str(rows, cols));
}

Tensor::Tensor(Index rows, Index cols, double fill) : m_(Matrix::Constant(rows, cols, fill)) {
  if (rows < 0 || cols < 0) throw ShapeError("negative tensor dimension " + ocan::shape_str(rows, cols));
}

Tensor::Tensor(Matrix m) : m_(std::move(m)) {}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const Index r = static_cast<Index>(rows.size());
  const Index c = r == 0 ? 0 : static_cast<Index>(rows.begin()->size());
  Tensor t(r, c);
  Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Index>(row.size()) != c) throw ShapeError("ragged initializer for Tensor");
    Index j = 0;
    for (double v : row) t(i, j++) = v;
    ++i;
  }
  return t;
}

Tensor Tensor::from_vector(Index rows, Index cols, std::span<const double> values) {
  if (static_cast<Index>(values.size()) != rows * cols) {
    throw ShapeError("cannot view " + std::to_string(values.size()) + " values as " +
                     ocan::shape_str(rows, cols));
  }
  Tensor t(rows, cols);
  if (!values.empty()) std::memcpy(t.m_.data(), values.data(), values.size() * sizeof(double));
  return t;
}

Tensor Tensor::row(std::span<const double> values) {
  return from_vector(1, static_cast<Index>(values.size()), values);
}

std::string Tensor::shape_str() const { return ocan::shape_str(rows(), cols()); }

bool operator==(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  return a.size() == 0 ||
         std::memcmp(a.m_.data(), b.m_.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

std::string shape_str(Index rows, Index cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

}  // namespace ocan
