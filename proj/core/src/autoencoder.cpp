#include "ocan/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ocan/batching.hpp"
#include "ocan/errors.hpp"

namespace ocan {

std::string to_string(OutputActivation a) {
  return a == OutputActivation::kSigmoid ? "sigmoid" : "identity";
}

OutputActivation output_activation_from_string(const std::string& s) {
  if (s == "sigmoid") return OutputActivation::kSigmoid;
  if (s == "identity") return OutputActivation::kIdentity;
  throw ArgumentError("unknown output activation '" + s + "' (expected sigmoid|identity)");
}

// ---------------------------------------------------------------------------
// SequenceEncoder

EncoderStreamState SequenceEncoder::start() const {
  return {Matrix::Zero(1, hidden()), Matrix::Zero(1, hidden()), 0};
}

void SequenceEncoder::push(EncoderStreamState& state, std::span<const double> x) const {
  kernel_.step(x, state.h, state.c);
  ++state.steps;
}

Tensor SequenceEncoder::encode(const ActivitySequence& seq) const {
  if (seq.length() == 0) throw ArgumentError("cannot encode empty sequence for user '" + seq.user_id + "'");
  EncoderStreamState s = start();
  for (Index t = 0; t < seq.length(); ++t) push(s, seq.steps.row_span(t));
  return Tensor(std::move(s.h));
}

Tensor SequenceEncoder::encode_all(std::span<const ActivitySequence> seqs) const {
  Tensor out(static_cast<Index>(seqs.size()), hidden());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    out.matrix().row(static_cast<Index>(i)) = encode(seqs[i]).matrix();
  }
  return out;
}

// ---------------------------------------------------------------------------
// LstmAutoencoder

LstmAutoencoder::LstmAutoencoder(Index input_width, Index hidden, OutputActivation output,
                                 ParamGroup params)
    : input_width_(input_width), hidden_(hidden), output_(output), params_(std::move(params)) {}

LstmAutoencoder LstmAutoencoder::random(Index input_width, Index hidden, OutputActivation output,
                                        SeededRng& rng) {
  ParamGroup g;
  add_lstm_params(g, "enc.", {input_width, hidden}, &rng);
  add_lstm_params(g, "dec.", {hidden, hidden}, &rng);
  g.add("out.W", init_weight(rng, hidden, input_width));
  g.add("out.b", Tensor(1, input_width));
  return LstmAutoencoder(input_width, hidden, output, std::move(g));
}

LstmAutoencoder LstmAutoencoder::zeros(Index input_width, Index hidden, OutputActivation output) {
  ParamGroup g;
  add_lstm_params(g, "enc.", {input_width, hidden}, nullptr);
  add_lstm_params(g, "dec.", {hidden, hidden}, nullptr);
  g.add("out.W", Tensor(hidden, input_width));
  g.add("out.b", Tensor(1, input_width));
  return LstmAutoencoder(input_width, hidden, output, std::move(g));
}

LstmAutoencoder LstmAutoencoder::from_params(ParamGroup params, OutputActivation output) {
  const LstmDims enc = lstm_dims(params, "enc.");
  const LstmDims dec = lstm_dims(params, "dec.");
  if (dec.input != enc.hidden || dec.hidden != enc.hidden) {
    throw ShapeError("decoder LSTM dims do not match encoder hidden width " + std::to_string(enc.hidden));
  }
  // Building the kernels validates every gate tensor.
  LstmKernel(params, "enc.");
  LstmKernel(params, "dec.");
  const Tensor& w = params.value("out.W");
  const Tensor& b = params.value("out.b");
  if (w.rows() != enc.hidden || w.cols() != enc.input || b.rows() != 1 || b.cols() != enc.input) {
    throw ShapeError("output head shape " + w.shape_str() + " does not match (hidden " +
                     std::to_string(enc.hidden) + ", input " + std::to_string(enc.input) + ")");
  }
  return LstmAutoencoder(enc.input, enc.hidden, output, std::move(params));
}

Tensor LstmAutoencoder::decode(const Tensor& v, Index steps) const {
  if (steps <= 0) throw ArgumentError("decode: number of steps must be positive");
  if (v.rows() != 1 || v.cols() != hidden_) {
    throw ShapeError("decode: representation has shape " + v.shape_str() + ", expected " +
                     shape_str(1, hidden_));
  }
  const LstmKernel dec(params_, "dec.");
  const Matrix& w = params_.value("out.W").matrix();
  const Matrix& b = params_.value("out.b").matrix();
  Matrix h = Matrix::Zero(1, hidden_);
  Matrix c = Matrix::Zero(1, hidden_);
  Tensor out(steps, input_width_);
  for (Index t = 0; t < steps; ++t) {
    dec.step(v.data(), h, c);
    Matrix y = h * w + b;
    if (output_ == OutputActivation::kSigmoid) {
      y = y.unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
    }
    out.matrix().row(t) = y;
  }
  return out;
}

Var LstmAutoencoder::batch_loss(Tape& tape, std::span<const ActivitySequence* const> batch,
                                bool trainable) {
  if (batch.empty()) throw ArgumentError("batch_loss: empty minibatch");
  for (const ActivitySequence* s : batch) {
    if (s->length() == 0) throw ArgumentError("batch_loss: empty sequence for user '" + s->user_id + "'");
    if (s->width() != input_width_) {
      throw ShapeError("sequence '" + s->user_id + "' has width " + std::to_string(s->width()) +
                       ", model expects " + std::to_string(input_width_));
    }
  }
  // Longest first, so the users still active at step t are always a prefix.
  std::vector<const ActivitySequence*> seqs(batch.begin(), batch.end());
  std::stable_sort(seqs.begin(), seqs.end(), [](const ActivitySequence* a, const ActivitySequence* b) {
    return a->length() > b->length();
  });
  const Index n = static_cast<Index>(seqs.size());
  const Index max_len = seqs.front()->length();

  // Step-major stacking: step t holds the first active[t] users.
  std::vector<Index> active(static_cast<std::size_t>(max_len));
  Index total = 0;
  for (Index t = 0; t < max_len; ++t) {
    Index k = 0;
    while (k < n && seqs[static_cast<std::size_t>(k)]->length() > t) ++k;
    active[static_cast<std::size_t>(t)] = k;
    total += k;
  }
  Matrix x(total, input_width_);
  std::vector<Index> last_row(static_cast<std::size_t>(n));
  std::vector<Index> repeat_v;
  repeat_v.reserve(static_cast<std::size_t>(total));
  Index off = 0;
  for (Index t = 0; t < max_len; ++t) {
    for (Index r = 0; r < active[static_cast<std::size_t>(t)]; ++r) {
      const ActivitySequence& s = *seqs[static_cast<std::size_t>(r)];
      x.row(off + r) = s.steps.matrix().row(t);
      if (s.length() == t + 1) last_row[static_cast<std::size_t>(r)] = off + r;
      repeat_v.push_back(r);
    }
    off += active[static_cast<std::size_t>(t)];
  }
  Var inputs = tape.constant(x);

  // Encoder: v is each user's hidden state at their last step.
  LstmVars enc = bind_lstm(tape, params_, "enc.", trainable);
  Var enc_h = lstm_unroll(enc, matmul(inputs, enc.w), active);
  Var v = gather_rows(enc_h, std::move(last_row));

  // Decoder: v is the input at every step.
  LstmVars dec = bind_lstm(tape, params_, "dec.", trainable);
  Var out_w = trainable ? tape.param(params_, "out.W") : tape.constant(params_.value("out.W"));
  Var out_b = trainable ? tape.param(params_, "out.b") : tape.constant(params_.value("out.b"));
  Var dec_h = lstm_unroll(dec, gather_rows(matmul(v, dec.w), std::move(repeat_v)), active);
  Var y = add(matmul(dec_h, out_w), out_b);
  if (output_ == OutputActivation::kSigmoid) y = sigmoid(y);
  return scale(sum(square(sub(y, inputs))), 1.0 / static_cast<double>(n));
}

double reconstruction_loss(const Tensor& reconstructed, const Tensor& target) {
  if (reconstructed.rows() != target.rows()) {
    throw ShapeError("reconstruction_loss: length " + std::to_string(reconstructed.rows()) +
                     " vs " + std::to_string(target.rows()));
  }
  if (reconstructed.cols() != target.cols()) {
    throw ShapeError("reconstruction_loss: width " + std::to_string(reconstructed.cols()) + " vs " +
                     std::to_string(target.cols()));
  }
  return (reconstructed.matrix() - target.matrix()).squaredNorm();
}

LstmAutoencoder train_autoencoder(std::span<const ActivitySequence> corpus,
                                  const AutoencoderConfig& config, TrainingLog* log,
                                  const EpochCallback& on_epoch) {
  if (corpus.empty()) throw ArgumentError("train_autoencoder: empty corpus");
  if (config.epochs <= 0 || config.batch_size == 0 || config.hidden <= 0) {
    throw ArgumentError("train_autoencoder: epochs, batch size and hidden width must be positive");
  }
  const Index width = corpus.front().width();
  for (const auto& s : corpus) {
    if (s.width() != width) {
      throw ShapeError("inconsistent feature widths in corpus: user '" + s.user_id + "' has " +
                       std::to_string(s.width()) + ", expected " + std::to_string(width));
    }
    if (s.length() == 0) throw ArgumentError("empty sequence for user '" + s.user_id + "'");
  }

  SeededRng init_rng(mix_seed(config.seed, 1));
  LstmAutoencoder model = LstmAutoencoder::random(width, config.hidden, config.output, init_rng);
  AdamState adam(model.params(), config.adam);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    const auto batches = minibatch_indices(corpus.size(), config.batch_size,
                                           mix_seed(config.seed, 100 + static_cast<std::uint64_t>(epoch)));
    std::vector<const ActivitySequence*> batch;
    for (const auto& idx : batches) {
      batch.clear();
      for (std::size_t i : idx) batch.push_back(&corpus[i]);
      model.params().zero_grad();
      Tape tape;
      Var loss = model.batch_loss(tape, batch);
      loss_sum += loss.scalar() * static_cast<double>(batch.size());
      tape.backward(loss);
      adam.apply(model.params());
    }
    const double mean_loss = loss_sum / static_cast<double>(corpus.size());
    if (!std::isfinite(mean_loss)) throw NumericError("autoencoder training diverged at epoch " + std::to_string(epoch));
    if (log) log->epoch_loss.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch, mean_loss);
  }
  model.params().zero_grad();
  return model;
}

// ---------------------------------------------------------------------------
// PlainAutoencoder

PlainAutoencoder::PlainAutoencoder(Index input_width, Index repr_width, ParamGroup params)
    : input_width_(input_width), repr_width_(repr_width), params_(std::move(params)) {}

PlainAutoencoder PlainAutoencoder::random(Index input_width, Index repr_width, SeededRng& rng) {
  ParamGroup g;
  g.add("enc.W", init_weight(rng, input_width, repr_width));
  g.add("enc.b", Tensor(1, repr_width));
  g.add("dec.W", init_weight(rng, repr_width, input_width));
  g.add("dec.b", Tensor(1, input_width));
  return PlainAutoencoder(input_width, repr_width, std::move(g));
}

PlainAutoencoder PlainAutoencoder::zeros(Index input_width, Index repr_width) {
  ParamGroup g;
  g.add("enc.W", Tensor(input_width, repr_width));
  g.add("enc.b", Tensor(1, repr_width));
  g.add("dec.W", Tensor(repr_width, input_width));
  g.add("dec.b", Tensor(1, input_width));
  return PlainAutoencoder(input_width, repr_width, std::move(g));
}

PlainAutoencoder PlainAutoencoder::from_params(ParamGroup params) {
  const Tensor& ew = params.value("enc.W");
  const Index d = ew.rows(), r = ew.cols();
  if (!params.value("enc.b").same_shape(Tensor(1, r)) || !params.value("dec.W").same_shape(Tensor(r, d)) ||
      !params.value("dec.b").same_shape(Tensor(1, d))) {
    throw ShapeError("plain autoencoder parameters have inconsistent shapes");
  }
  return PlainAutoencoder(d, r, std::move(params));
}

Tensor PlainAutoencoder::encode(const Tensor& x) const {
  if (x.cols() != input_width_) {
    throw ShapeError("plain encoder expects width " + std::to_string(input_width_) + ", got " +
                     std::to_string(x.cols()));
  }
  Matrix z = x.matrix() * params_.value("enc.W").matrix();
  z.rowwise() += params_.value("enc.b").matrix().row(0);
  return Tensor(Matrix(z.array().tanh()));
}

Tensor PlainAutoencoder::decode(const Tensor& v) const {
  if (v.cols() != repr_width_) throw ShapeError("plain decoder expects width " + std::to_string(repr_width_));
  Matrix y = v.matrix() * params_.value("dec.W").matrix();
  y.rowwise() += params_.value("dec.b").matrix().row(0);
  return Tensor(std::move(y));
}

Var PlainAutoencoder::batch_loss(Tape& tape, const Tensor& batch, bool trainable) {
  if (batch.rows() == 0) throw ArgumentError("batch_loss: empty minibatch");
  if (batch.cols() != input_width_) {
    throw ShapeError("plain autoencoder expects width " + std::to_string(input_width_) + ", got " +
                     std::to_string(batch.cols()));
  }
  auto p = tape.bind(params_, trainable);
  Var x = tape.constant(batch);
  Var v = tanh(add(matmul(x, p[0]), p[1]));
  Var y = add(matmul(v, p[2]), p[3]);
  return scale(sum(square(sub(y, x))), 1.0 / static_cast<double>(batch.rows()));
}

PlainAutoencoder train_plain_autoencoder(const Tensor& data, const AutoencoderConfig& config,
                                         TrainingLog* log, const EpochCallback& on_epoch) {
  if (data.rows() == 0) throw ArgumentError("train_plain_autoencoder: empty corpus");
  if (config.epochs <= 0 || config.batch_size == 0 || config.hidden <= 0) {
    throw ArgumentError("train_plain_autoencoder: epochs, batch size and width must be positive");
  }
  if (!data.all_finite()) throw NumericError("train_plain_autoencoder: non-finite input");
  SeededRng init_rng(mix_seed(config.seed, 1));
  PlainAutoencoder model = PlainAutoencoder::random(data.cols(), config.hidden, init_rng);
  AdamState adam(model.params(), config.adam);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto& idx : minibatch_indices(static_cast<std::size_t>(data.rows()), config.batch_size,
                                             mix_seed(config.seed, 100 + static_cast<std::uint64_t>(epoch)))) {
      Tensor batch(static_cast<Index>(idx.size()), data.cols());
      for (std::size_t r = 0; r < idx.size(); ++r) {
        batch.matrix().row(static_cast<Index>(r)) = data.matrix().row(static_cast<Index>(idx[r]));
      }
      model.params().zero_grad();
      Tape tape;
      Var loss = model.batch_loss(tape, batch);
      loss_sum += loss.scalar() * static_cast<double>(idx.size());
      tape.backward(loss);
      adam.apply(model.params());
    }
    const double mean_loss = loss_sum / static_cast<double>(data.rows());
    if (log) log->epoch_loss.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch, mean_loss);
  }
  model.params().zero_grad();
  return model;
}

}  // namespace ocan
