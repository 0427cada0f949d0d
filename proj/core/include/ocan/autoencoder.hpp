#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ocan/lstm.hpp"
#include "ocan/optim.hpp"
#include "ocan/params.hpp"
#include "ocan/sequence.hpp"
#include "ocan/tape.hpp"

namespace ocan {

// Nonlinearity of the reconstruction head: sigmoid for {0,1} features,
// identity for real-valued ones.
enum class OutputActivation { kSigmoid, kIdentity };

std::string to_string(OutputActivation a);
OutputActivation output_activation_from_string(const std::string& s);

struct AutoencoderConfig {
  Index hidden = 200;
  int epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  OutputActivation output = OutputActivation::kSigmoid;
  AdamConfig adam;
};

struct TrainingLog {
  // Mean per-instance loss over each epoch, measured before each update.
  std::vector<double> epoch_loss;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// Running encoder state for one user; v_t is `h` after `steps` events.
struct EncoderStreamState {
  Matrix h;
  Matrix c;
  Index steps = 0;
};

// Frozen LSTM encoder (fused weights) used at scoring time.
class SequenceEncoder {
 public:
  SequenceEncoder() = default;
  SequenceEncoder(const ParamGroup& group, std::string_view prefix) : kernel_(group, prefix) {}

  Index input_width() const { return kernel_.dims().input; }
  Index hidden() const { return kernel_.dims().hidden; }

  EncoderStreamState start() const;
  void push(EncoderStreamState& state, std::span<const double> x) const;
  // h_T after folding the sequence from a zero state. Throws on T = 0.
  Tensor encode(const ActivitySequence& seq) const;
  Tensor encode_all(std::span<const ActivitySequence> seqs) const;  // N×h

 private:
  LstmKernel kernel_;
};

// Encoder LSTM over d inputs, decoder LSTM fed v at every step, and an
// affine head mapping decoder states back to d features. Parameters live in
// one group under the prefixes "enc.", "dec." and "out.".
class LstmAutoencoder {
 public:
  static LstmAutoencoder random(Index input_width, Index hidden, OutputActivation output,
                                SeededRng& rng);
  static LstmAutoencoder zeros(Index input_width, Index hidden, OutputActivation output);
  // Adopts a parameter group (e.g. from a checkpoint); validates all shapes.
  static LstmAutoencoder from_params(ParamGroup params, OutputActivation output);

  Index input_width() const { return input_width_; }
  Index hidden() const { return hidden_; }
  OutputActivation output() const { return output_; }
  ParamGroup& params() { return params_; }
  const ParamGroup& params() const { return params_; }

  SequenceEncoder encoder() const { return SequenceEncoder(params_, "enc."); }
  Tensor encode(const ActivitySequence& seq) const { return encoder().encode(seq); }
  EncoderStreamState stream_start() const { return encoder().start(); }
  // Reconstructs T steps from v (1×hidden); returns T×d.
  Tensor decode(const Tensor& v, Index steps) const;

  // Mean over the batch of the per-user summed squared error. Sequences of
  // different lengths share one pass: rows are ordered by length and each
  // step runs only on the users still active, so no padding reaches the loss.
  Var batch_loss(Tape& tape, std::span<const ActivitySequence* const> batch, bool trainable = true);

 private:
  LstmAutoencoder(Index input_width, Index hidden, OutputActivation output, ParamGroup params);
  Index input_width_ = 0;
  Index hidden_ = 0;
  OutputActivation output_ = OutputActivation::kSigmoid;
  ParamGroup params_;
};

// Σ_t ‖x̂_t − x_t‖² over steps and coordinates.
double reconstruction_loss(const Tensor& reconstructed, const Tensor& target);

LstmAutoencoder train_autoencoder(std::span<const ActivitySequence> corpus,
                                  const AutoencoderConfig& config, TrainingLog* log = nullptr,
                                  const EpochCallback& on_epoch = {});

// Single hidden layer autoencoder for fixed-width records:
// tanh(xW+b) down to the representation width, affine back up.
class PlainAutoencoder {
 public:
  static PlainAutoencoder random(Index input_width, Index repr_width, SeededRng& rng);
  static PlainAutoencoder zeros(Index input_width, Index repr_width);
  static PlainAutoencoder from_params(ParamGroup params);

  Index input_width() const { return input_width_; }
  Index repr_width() const { return repr_width_; }
  ParamGroup& params() { return params_; }
  const ParamGroup& params() const { return params_; }

  Tensor encode(const Tensor& x) const;  // N×d -> N×r
  Tensor decode(const Tensor& v) const;  // N×r -> N×d
  // Mean over rows of the per-row summed squared error.
  Var batch_loss(Tape& tape, const Tensor& batch, bool trainable = true);

 private:
  PlainAutoencoder(Index input_width, Index repr_width, ParamGroup params);
  Index input_width_ = 0;
  Index repr_width_ = 0;
  ParamGroup params_;
};

// `config.hidden` is the representation width (default 50 for this model).
PlainAutoencoder train_plain_autoencoder(const Tensor& data, const AutoencoderConfig& config,
                                         TrainingLog* log = nullptr,
                                         const EpochCallback& on_epoch = {});

}  // namespace ocan
