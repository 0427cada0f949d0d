#pragma once

#include <string>

#include "ocan/tensor.hpp"

namespace ocan {

enum class Label : int { kBenign = 0, kMalicious = 1 };

// One user's activity: T×d, row t is the feature vector of step t+1.
struct ActivitySequence {
  std::string user_id;
  Tensor steps;

  Index length() const { return steps.rows(); }
  Index width() const { return steps.cols(); }
};

// One fixed-width instance (e.g. a card transaction): 1×d.
struct FeatureVector {
  std::string id;
  Tensor values;

  Index width() const { return values.cols(); }
};

}  // namespace ocan
