#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ocan/params.hpp"
#include "ocan/rng.hpp"
#include "ocan/sequence.hpp"
#include "ocan/tape.hpp"

namespace ocan {

struct LstmDims {
  Index input = 0;
  Index hidden = 0;
};

// Gate order used everywhere: candidate (c), input (i), forget (f), output (o).
inline constexpr std::string_view kLstmGates[4] = {"c", "i", "f", "o"};

// Adds W_g (input×hidden), U_g (hidden×hidden) and b_g (1×hidden) for every
// gate under `prefix`. With an rng, weights are uniform in ±sqrt(1/fan_in)
// and the forget bias starts at 1; without one everything is zero.
void add_lstm_params(ParamGroup& group, std::string_view prefix, LstmDims dims, SeededRng* rng);
LstmDims lstm_dims(const ParamGroup& group, std::string_view prefix);

// Standalone LSTM weights.
struct LstmParams {
  LstmDims dims;
  ParamGroup group;

  static LstmParams random(LstmDims dims, SeededRng& rng);
  static LstmParams zeros(LstmDims dims);
};

// (h, c) as 1×hidden rows (or B×hidden on batched paths).
struct LstmState {
  Tensor h;
  Tensor c;

  static LstmState zeros(Index hidden) { return {Tensor(1, hidden), Tensor(1, hidden)}; }
};

// Inference-only LSTM with the four gate matrices fused. Every value-level
// encoder path goes through step(), which is what makes streaming and
// one-shot encoding agree bit for bit.
class LstmKernel {
 public:
  LstmKernel() = default;
  LstmKernel(const ParamGroup& group, std::string_view prefix);

  const LstmDims& dims() const { return dims_; }
  void step(std::span<const double> x, Matrix& h, Matrix& c) const;
  LstmState step(std::span<const double> x, const LstmState& prev) const;

 private:
  LstmDims dims_;
  Matrix w_;  // input × 4h
  Matrix u_;  // hidden × 4h
  Matrix b_;  // 1 × 4h
};

LstmState lstm_step(const LstmParams& params, std::span<const double> x, const LstmState& prev);

// Tape-side LSTM: fused weights bound once per forward pass.
struct LstmVars {
  Var w;  // input × 4h
  Var u;  // hidden × 4h
  Var b;  // 1 × 4h
  Index hidden = 0;
};

LstmVars bind_lstm(Tape& tape, ParamGroup& group, std::string_view prefix, bool trainable = true);

// One batched step built from primitive ops. `input_proj` is x·W (B×4h),
// precomputed by the caller so constant decoder inputs are projected once.
std::pair<Var, Var> lstm_cell(const LstmVars& lstm, Var input_proj, Var h, Var c);

// Runs a zero-initialised LSTM over a batch of sequences as a single tape
// node. Rows are stacked step-major: step t contributes active[t] rows, and
// those rows continue the first active[t] rows of step t-1, so `active` must
// be non-increasing. `input_proj` holds x·W in that layout; the result holds
// every hidden state in the same layout.
Var lstm_unroll(const LstmVars& lstm, Var input_proj, std::vector<Index> active);

}  // namespace ocan
