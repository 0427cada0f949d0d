#include "ocan/optim.hpp"

#include <cmath>

#include "ocan/errors.hpp"

namespace ocan {

AdamState::AdamState(const ParamGroup& params, AdamConfig config) : config_(config) {
  if (!(config.learning_rate > 0.0) || !(config.beta1 >= 0.0 && config.beta1 < 1.0) ||
      !(config.beta2 >= 0.0 && config.beta2 < 1.0) || !(config.epsilon > 0.0)) {
    throw ArgumentError("invalid Adam hyperparameters");
  }
  for (const auto& e : params) {
    m_.emplace_back(e.value.rows(), e.value.cols());
    v_.emplace_back(e.value.rows(), e.value.cols());
  }
}

void AdamState::apply(ParamGroup& params) {
  if (params.size() != m_.size()) {
    throw ShapeError("Adam state tracks " + std::to_string(m_.size()) + " tensors but group has " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].value.same_shape(m_[i])) {
      throw ShapeError("Adam state for '" + params[i].name + "' has shape " + m_[i].shape_str() +
                       " but parameter is " + params[i].value.shape_str());
    }
  }
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = params[i].grad.matrix().array();
    auto m = m_[i].matrix().array();
    auto v = v_[i].matrix().array();
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.square();
    params[i].value.matrix().array() -=
        config_.learning_rate * (m / c1) / ((v / c2).sqrt() + config_.epsilon);
    if (!params[i].value.all_finite()) {
      throw NumericError("Adam update produced non-finite values in '" + params[i].name + "'");
    }
  }
}

}  // namespace ocan
