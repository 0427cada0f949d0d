#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ocan/autoencoder.hpp"
#include "ocan/checkpoint.hpp"
#include "ocan/data_io.hpp"
#include "ocan/gan.hpp"

namespace ocan {

enum class EncoderKind { kLstm, kPlain, kIdentity };
std::string to_string(EncoderKind k);
EncoderKind encoder_kind_from_string(const std::string& s);

// Benign iff p_benign > threshold; a tie is malicious.
inline Label label_for(double p_benign, double threshold) {
  return p_benign > threshold ? Label::kBenign : Label::kMalicious;
}

// A trained encoder (or none) plus the discriminator used for scoring.
struct OcanModel {
  EncoderKind encoder = EncoderKind::kLstm;
  Index input_width = 0;
  std::optional<LstmAutoencoder> lstm;
  std::optional<PlainAutoencoder> plain;
  std::optional<DensityProxy> proxy;  // absent for regular-GAN models
  std::optional<Generator> generator;
  std::optional<Discriminator> discriminator;
  std::string variant = "ocan";  // "ocan" or "ocan-r"
  std::map<std::string, std::string> meta;

  Index representation_width() const;
  void validate() const;
};

Checkpoint autoencoder_checkpoint(const LstmAutoencoder& ae);
Checkpoint autoencoder_checkpoint(const PlainAutoencoder& ae);
// Encoder half of an OcanModel from a "autoencoder" checkpoint.
OcanModel encoder_from_checkpoint(const Checkpoint& ckpt);

Checkpoint model_checkpoint(const OcanModel& model);
OcanModel model_from_checkpoint(const Checkpoint& ckpt);

struct Prediction {
  std::string id;
  double p_benign = 0.0;
  Label label = Label::kMalicious;
};

struct StepScore {
  Index step = 0;  // 1-based index of the event just consumed
  double p_benign = 0.0;
  bool flagged = false;  // true from the first flagging step onwards
};

struct EarlyDetection {
  std::string id;
  std::vector<StepScore> steps;
  std::optional<Index> first_flag;
};

class FraudDetector;

// Per-user streaming state. Step indices must strictly increase.
class DetectorStream {
 public:
  StepScore push(Index step, std::span<const double> x);
  const std::optional<Index>& first_flag() const { return first_flag_; }

 private:
  friend class FraudDetector;
  DetectorStream(const FraudDetector& det, double flag_threshold);
  const FraudDetector* det_;
  double flag_threshold_;
  EncoderStreamState state_;
  Index last_step_ = 0;
  std::optional<Index> first_flag_;
};

class FraudDetector {
 public:
  explicit FraudDetector(OcanModel model, double threshold = 0.5);

  const OcanModel& model() const { return model_; }
  double threshold() const { return threshold_; }

  Tensor represent(const ActivitySequence& seq) const;
  Tensor represent(const Tensor& rows) const;  // vector encoders, N×d -> N×h
  double p_benign(const Tensor& representation) const;

  Prediction detect_user(const ActivitySequence& seq) const;
  std::vector<Prediction> score_batch(std::span<const ActivitySequence> corpus) const;
  std::vector<Prediction> score_vectors(const VectorDataset& data) const;

  DetectorStream stream(double flag_threshold = 0.5) const { return DetectorStream(*this, flag_threshold); }
  EarlyDetection early_detect(const ActivitySequence& seq, double flag_threshold = 0.5) const;

 private:
  friend class DetectorStream;
  void require_lstm(const char* what) const;
  OcanModel model_;
  SequenceEncoder encoder_;
  double threshold_;
};

}  // namespace ocan
