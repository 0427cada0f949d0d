#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ocan {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense rank-2 array of doubles stored row-major. Vectors are 1×n rows.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Index rows, Index cols);
  Tensor(Index rows, Index cols, double fill);
  explicit Tensor(Matrix m);

  static Tensor zeros(Index rows, Index cols) { return Tensor(rows, cols); }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor from_vector(Index rows, Index cols, std::span<const double> values);
  static Tensor row(std::span<const double> values);

  Index rows() const { return m_.rows(); }
  Index cols() const { return m_.cols(); }
  Index size() const { return m_.size(); }
  bool empty() const { return m_.size() == 0; }
  std::string shape_str() const;
  bool same_shape(const Tensor& other) const {
    return rows() == other.rows() && cols() == other.cols();
  }

  double& operator()(Index r, Index c) { return m_(r, c); }
  double operator()(Index r, Index c) const { return m_(r, c); }
  double& operator[](Index i) { return m_.data()[i]; }
  double operator[](Index i) const { return m_.data()[i]; }

  std::span<double> data() { return {m_.data(), static_cast<std::size_t>(m_.size())}; }
  std::span<const double> data() const {
    return {m_.data(), static_cast<std::size_t>(m_.size())};
  }
  std::span<const double> row_span(Index r) const {
    return {m_.data() + r * m_.cols(), static_cast<std::size_t>(m_.cols())};
  }

  Matrix& matrix() { return m_; }
  const Matrix& matrix() const { return m_; }

  void set_zero() { m_.setZero(); }
  bool all_finite() const { return m_.allFinite(); }
  std::vector<double> to_vector() const { return {m_.data(), m_.data() + m_.size()}; }

  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  Matrix m_;
};

std::string shape_str(Index rows, Index cols);

}  // namespace ocan
