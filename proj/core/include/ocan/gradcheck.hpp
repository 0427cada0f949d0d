#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "ocan/params.hpp"
#include "ocan/tape.hpp"

namespace ocan {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Groups larger than this are checked on a seeded sample of coordinates.
  Index max_coordinates = 4000;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Index worst_index = -1;
  Index coordinates_checked = 0;
  bool passed = false;
};

// Builds a scalar loss on the given tape from the parameters of the group.
using LossBuilder = std::function<Var(Tape&, ParamGroup&)>;

// Compares backward() against central differences
// (loss(θ + h e_i) − loss(θ − h e_i)) / 2h. Relative error is
// |a − n| / max(1, |a|, |n|). Throws NumericError when two evaluations at the
// same point disagree (non-deterministic loss).
GradCheckReport finite_diff_check(const LossBuilder& loss_fn, ParamGroup& params,
                                  const GradCheckOptions& options = {});

}  // namespace ocan
