#include "ocan/lstm.hpp"

#include <cmath>

#include "ocan/errors.hpp"

namespace ocan {

namespace {

std::string key(std::string_view prefix, std::string_view kind, std::string_view gate) {
  std::string k(prefix);
  k += kind;
  k += '_';
  k += gate;
  return k;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Array forms that vectorize through exp: σ(z) = 1 / (1 + e^−z), tanh(z) = 2σ(2z) − 1.
template <typename A>
auto fast_sigmoid(const A& z) {
  return 1.0 / (1.0 + (-z).exp());
}

template <typename A>
auto fast_tanh(const A& z) {
  return 2.0 / (1.0 + (-2.0 * z).exp()) - 1.0;
}

}  // namespace

void add_lstm_params(ParamGroup& group, std::string_view prefix, LstmDims dims, SeededRng* rng) {
  if (dims.input <= 0 || dims.hidden <= 0) throw ArgumentError("LSTM dimensions must be positive");
  for (auto g : kLstmGates) {
    group.add(key(prefix, "W", g), rng ? init_weight(*rng, dims.input, dims.hidden)
                                       : Tensor(dims.input, dims.hidden));
  }
  for (auto g : kLstmGates) {
    group.add(key(prefix, "U", g), rng ? init_weight(*rng, dims.hidden, dims.hidden)
                                       : Tensor(dims.hidden, dims.hidden));
  }
  for (auto g : kLstmGates) {
    const double bias = (rng != nullptr && g == "f") ? 1.0 : 0.0;
    group.add(key(prefix, "b", g), Tensor(1, dims.hidden, bias));
  }
}

LstmDims lstm_dims(const ParamGroup& group, std::string_view prefix) {
  const Tensor& w = group.value(key(prefix, "W", "c"));
  return {w.rows(), w.cols()};
}

LstmParams LstmParams::random(LstmDims dims, SeededRng& rng) {
  LstmParams p{dims, {}};
  add_lstm_params(p.group, "", dims, &rng);
  return p;
}

LstmParams LstmParams::zeros(LstmDims dims) {
  LstmParams p{dims, {}};
  add_lstm_params(p.group, "", dims, nullptr);
  return p;
}

LstmKernel::LstmKernel(const ParamGroup& group, std::string_view prefix)
    : dims_(lstm_dims(group, prefix)) {
  const Index h = dims_.hidden;
  w_.resize(dims_.input, 4 * h);
  u_.resize(h, 4 * h);
  b_.resize(1, 4 * h);
  for (int g = 0; g < 4; ++g) {
    const Tensor& w = group.value(key(prefix, "W", kLstmGates[g]));
    const Tensor& u = group.value(key(prefix, "U", kLstmGates[g]));
    const Tensor& b = group.value(key(prefix, "b", kLstmGates[g]));
    if (w.rows() != dims_.input || w.cols() != h || u.rows() != h || u.cols() != h ||
        b.rows() != 1 || b.cols() != h) {
      throw ShapeError("inconsistent LSTM parameter shapes under prefix '" + std::string(prefix) + "'");
    }
    w_.middleCols(g * h, h) = w.matrix();
    u_.middleCols(g * h, h) = u.matrix();
    b_.middleCols(g * h, h) = b.matrix();
  }
}

void LstmKernel::step(std::span<const double> x, Matrix& h, Matrix& c) const {
  const Index hid = dims_.hidden;
  if (static_cast<Index>(x.size()) != dims_.input) {
    throw ShapeError("LSTM input width " + std::to_string(x.size()) + " does not match " +
                     std::to_string(dims_.input));
  }
  if (h.rows() != 1 || h.cols() != hid || c.rows() != 1 || c.cols() != hid) {
    throw ShapeError("LSTM state width does not match hidden width " + std::to_string(hid));
  }
  const Eigen::Map<const Matrix> xrow(x.data(), 1, dims_.input);
  Matrix z = xrow * w_;
  z.noalias() += h * u_;
  z += b_;
  for (Index j = 0; j < hid; ++j) {
    const double cand = std::tanh(z(0, j));
    const double in = logistic(z(0, hid + j));
    const double forget = logistic(z(0, 2 * hid + j));
    const double out = logistic(z(0, 3 * hid + j));
    c(0, j) = in * cand + forget * c(0, j);
    h(0, j) = out * std::tanh(c(0, j));
  }
  if (!h.allFinite() || !c.allFinite()) throw NumericError("LSTM step produced a non-finite state");
}

LstmState LstmKernel::step(std::span<const double> x, const LstmState& prev) const {
  Matrix h = prev.h.matrix();
  Matrix c = prev.c.matrix();
  step(x, h, c);
  return {Tensor(std::move(h)), Tensor(std::move(c))};
}

LstmState lstm_step(const LstmParams& params, std::span<const double> x, const LstmState& prev) {
  return LstmKernel(params.group, "").step(x, prev);
}

LstmVars bind_lstm(Tape& tape, ParamGroup& group, std::string_view prefix, bool trainable) {
  auto bind_one = [&](const std::string& name) {
    return trainable ? tape.param(group, name) : tape.constant(group.value(name));
  };
  Var ws[4], us[4], bs[4];
  for (int g = 0; g < 4; ++g) {
    ws[g] = bind_one(key(prefix, "W", kLstmGates[g]));
    us[g] = bind_one(key(prefix, "U", kLstmGates[g]));
    bs[g] = bind_one(key(prefix, "b", kLstmGates[g]));
  }
  LstmVars v;
  v.w = concat_cols(ws);
  v.u = concat_cols(us);
  v.b = concat_cols(bs);
  v.hidden = us[0].rows();
  return v;
}

std::pair<Var, Var> lstm_cell(const LstmVars& lstm, Var input_proj, Var h, Var c) {
  const Index hid = lstm.hidden;
  Var z = add(add(input_proj, matmul(h, lstm.u)), lstm.b);
  Var cand = tanh(slice_cols(z, 0, hid));
  Var in = sigmoid(slice_cols(z, hid, hid));
  Var forget = sigmoid(slice_cols(z, 2 * hid, hid));
  Var out = sigmoid(slice_cols(z, 3 * hid, hid));
  Var c_next = add(mul(in, cand), mul(forget, c));
  Var h_next = mul(out, tanh(c_next));
  return {h_next, c_next};
}

Var lstm_unroll(const LstmVars& lstm, Var input_proj, std::vector<Index> active) {
  Tape& tape = *input_proj.tape();
  const Index hid = lstm.hidden;
  if (active.empty()) throw ArgumentError("lstm_unroll: no steps");
  Index total = 0;
  for (std::size_t t = 0; t < active.size(); ++t) {
    if (active[t] <= 0 || (t > 0 && active[t] > active[t - 1])) {
      throw ArgumentError("lstm_unroll: active row counts must be positive and non-increasing");
    }
    total += active[t];
  }
  if (input_proj.rows() != total || input_proj.cols() != 4 * hid) {
    throw ShapeError("lstm_unroll: projection " + shape_str(input_proj.rows(), input_proj.cols()) +
                     ", expected " + shape_str(total, 4 * hid));
  }
  const Matrix& u = lstm.u.value();
  auto bias = lstm.b.value().row(0);

  // Gates hold the activated [c~ | i | f | o] for every (step, row).
  Matrix gates = input_proj.value();
  Matrix cell(total, hid);
  Matrix tanh_c(total, hid);
  Matrix hs(total, hid);
  Index off = 0, prev_off = 0;
  for (std::size_t t = 0; t < active.size(); ++t) {
    const Index n = active[t];
    auto z = gates.middleRows(off, n);
    if (t > 0) z.noalias() += hs.middleRows(prev_off, n) * u;
    z.rowwise() += bias;
    z.leftCols(hid) = fast_tanh(z.leftCols(hid).array()).matrix();
    z.rightCols(3 * hid) = fast_sigmoid(z.rightCols(3 * hid).array()).matrix();
    auto c = cell.middleRows(off, n);
    c = (z.middleCols(hid, hid).array() * z.leftCols(hid).array()).matrix();
    if (t > 0) {
      c.array() += z.middleCols(2 * hid, hid).array() * cell.middleRows(prev_off, n).array();
    }
    tanh_c.middleRows(off, n) = fast_tanh(c.array()).matrix();
    hs.middleRows(off, n) = (z.rightCols(hid).array() * tanh_c.middleRows(off, n).array()).matrix();
    prev_off = off;
    off += n;
  }

  const std::size_t ip = input_proj.id(), iu = lstm.u.id(), ib = lstm.b.id();
  const bool grad = input_proj.requires_grad() || lstm.u.requires_grad() || lstm.b.requires_grad();
  Matrix out = hs;
  return tape.record(
      std::move(out), grad,
      [ip, iu, ib, hid, active = std::move(active), gates = std::move(gates), cell = std::move(cell),
       tanh_c = std::move(tanh_c), hs = std::move(hs)](Tape& t, const Matrix& g) {
        const Index total = gates.rows();
        const Matrix& u = t.value(iu);
        Matrix dz(total, 4 * hid);
        Matrix dh_carry = Matrix::Zero(active.front(), hid);
        Matrix dc_carry = Matrix::Zero(active.front(), hid);
        std::vector<Index> offsets(active.size());
        Index off = 0;
        for (std::size_t s = 0; s < active.size(); ++s) {
          offsets[s] = off;
          off += active[s];
        }
        for (std::size_t s = active.size(); s-- > 0;) {
          const Index n = active[s];
          const Index o = offsets[s];
          auto z = gates.middleRows(o, n).array();
          auto cand = z.leftCols(hid);
          auto in = z.middleCols(hid, hid);
          auto forget = z.middleCols(2 * hid, hid);
          auto og = z.rightCols(hid);
          auto tc = tanh_c.middleRows(o, n).array();
          Matrix dh = g.middleRows(o, n) + dh_carry.topRows(n);
          Matrix dc = dc_carry.topRows(n).array() + dh.array() * og * (1.0 - tc * tc);
          auto d = dz.middleRows(o, n);
          d.leftCols(hid) = (dc.array() * in * (1.0 - cand * cand)).matrix();
          d.middleCols(hid, hid) = (dc.array() * cand * in * (1.0 - in)).matrix();
          if (s > 0) {
            d.middleCols(2 * hid, hid) = (dc.array() * cell.middleRows(offsets[s - 1], n).array() *
                                          forget * (1.0 - forget))
                                             .matrix();
          } else {
            d.middleCols(2 * hid, hid).setZero();
          }
          d.rightCols(hid) = (dh.array() * tc * og * (1.0 - og)).matrix();
          if (s > 0) {
            dh_carry.topRows(n).noalias() = d * u.transpose();
            dc_carry.topRows(n) = (dc.array() * forget).matrix();
          }
        }
        t.accumulate(ip, dz);
        if (t.requires_grad(iu) && active.size() > 1) {
          // Previous hidden states lined up with the rows of steps 1..T-1.
          const Index first = active.front();
          Matrix h_prev(total - first, hid);
          for (std::size_t s = 1; s < active.size(); ++s) {
            h_prev.middleRows(offsets[s] - first, active[s]) =
                hs.middleRows(offsets[s - 1], active[s]);
          }
          t.accumulate_expr(iu, h_prev.transpose() * dz.bottomRows(total - first));
        }
        if (t.requires_grad(ib)) t.accumulate_expr(ib, dz.colwise().sum());
      },
      "lstm_unroll");
}

}  // namespace ocan
