#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "ocan/params.hpp"
#include "ocan/sequence.hpp"
#include "ocan/tensor.hpp"

namespace ocan::test {

// Same fill as tests/oracles/reference_values.py: the k-th scalar of the
// group (entries in group order, row-major) is amp*sin(0.37k + phase).
inline void fill_group(ParamGroup& g, double phase = 0.11, double amp = 0.5) {
  long k = 0;
  for (auto& e : g) {
    for (Index r = 0; r < e.value.rows(); ++r) {
      for (Index c = 0; c < e.value.cols(); ++c) e.value(r, c) = amp * std::sin(0.37 * static_cast<double>(k++) + phase);
    }
  }
}

inline Tensor cos_inputs(Index rows, Index cols, double phase = 0.2, double scale = 1.0) {
  Tensor t(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) t(i, j) = scale * 0.8 * std::cos(0.53 * static_cast<double>(i * cols + j) + phase);
  }
  return t;
}

inline ActivitySequence make_seq(std::string id, std::initializer_list<std::initializer_list<double>> rows) {
  return {std::move(id), Tensor::from_rows(rows)};
}

// Midpoint of the widest gap between adjacent sorted scores, so samples fall on
// both sides and small perturbations keep every sample on its side.
inline double gap_threshold(const Tensor& scores) {
  std::vector<double> v(scores.data().begin(), scores.data().end());
  std::sort(v.begin(), v.end());
  std::size_t best = 0;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (v[i + 1] - v[i] > v[best + 1] - v[best]) best = i;
  }
  return 0.5 * (v[best] + v[best + 1]);
}

}  // namespace ocan::test
