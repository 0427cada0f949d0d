#pragma once

#include <cstdint>
#include <vector>

#include "ocan/params.hpp"

namespace ocan {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment estimates for one ParamGroup. Shapes mirror the group at creation.
class AdamState {
 public:
  AdamState() = default;
  AdamState(const ParamGroup& params, AdamConfig config = {});

  const AdamConfig& config() const { return config_; }
  std::int64_t step() const { return step_; }
  const std::vector<Tensor>& first_moment() const { return m_; }
  const std::vector<Tensor>& second_moment() const { return v_; }

  // Bias-corrected Adam update from the accumulated gradients. Does not
  // clear the gradients.
  void apply(ParamGroup& params);

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

inline void adam_step(ParamGroup& params, AdamState& state) { state.apply(params); }

}  // namespace ocan
