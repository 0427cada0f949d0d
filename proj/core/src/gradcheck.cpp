#include "ocan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "ocan/errors.hpp"
#include "ocan/rng.hpp"

namespace ocan {

namespace {

double evaluate(const LossBuilder& loss_fn, ParamGroup& params) {
  Tape tape;
  return loss_fn(tape, params).scalar();
}

}  // namespace

GradCheckReport finite_diff_check(const LossBuilder& loss_fn, ParamGroup& params,
                                  const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ArgumentError("finite_diff_check: step must be positive");

  const double base = evaluate(loss_fn, params);
  if (evaluate(loss_fn, params) != base) {
    throw NumericError("finite_diff_check: loss function is not deterministic");
  }

  // Analytic gradients, stashed so the caller's accumulators are left as found.
  std::vector<Tensor> saved;
  for (auto& e : params) saved.push_back(e.grad);
  params.zero_grad();
  {
    Tape tape;
    Var loss = loss_fn(tape, params);
    tape.backward(loss);
  }
  std::vector<Tensor> analytic;
  for (auto& e : params) analytic.push_back(e.grad);
  for (std::size_t i = 0; i < params.size(); ++i) params[i].grad = saved[i];

  std::vector<std::pair<std::size_t, Index>> coords;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (Index k = 0; k < params[p].value.size(); ++k) coords.emplace_back(p, k);
  }
  if (static_cast<Index>(coords.size()) > options.max_coordinates) {
    SeededRng rng(options.seed);
    rng.shuffle(std::span(coords));
    coords.resize(static_cast<std::size_t>(options.max_coordinates));
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  for (const auto& [p, k] : coords) {
    double& theta = params[p].value[k];
    const double original = theta;
    theta = original + options.step;
    const double plus = evaluate(loss_fn, params);
    theta = original - options.step;
    const double minus = evaluate(loss_fn, params);
    theta = original;
    const double numeric = (plus - minus) / (2.0 * options.step);
    const double a = analytic[p][k];
    const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
    ++report.coordinates_checked;
    if (err > report.max_relative_error || report.worst_index < 0) {
      report.max_relative_error = std::max(report.max_relative_error, err);
      if (err >= report.max_relative_error) {
        report.worst_parameter = params[p].name;
        report.worst_index = k;
      }
    }
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace ocan
