#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <vector>

#include "fixtures.hpp"
#include "ocan/checkpoint.hpp"
#include "ocan/data_io.hpp"
#include "ocan/detector.hpp"
#include "ocan/errors.hpp"

namespace ocan {
namespace {

OcanModel random_model(Index width, Index hidden, std::uint64_t seed) {
  SeededRng rng(seed);
  OcanModel m;
  m.encoder = EncoderKind::kLstm;
  m.input_width = width;
  m.lstm = LstmAutoencoder::random(width, hidden, OutputActivation::kSigmoid, rng);
  m.discriminator = Discriminator::random(hidden, rng, 12, 6);
  m.generator = Generator::random(hidden, rng, 5, 7);
  m.proxy = DensityProxy{Discriminator::random(hidden, rng, 12, 6), 0.25};
  // Spread the scores so both labels occur.
  for (double& w : m.discriminator->params().value("D.W3").data()) w *= 8.0;
  m.meta["seed"] = std::to_string(seed);
  return m;
}

SequenceCorpus synthetic(std::size_t per_class, std::uint64_t seed) {
  SyntheticConfig sc;
  sc.benign_users = per_class;
  sc.malicious_users = per_class;
  sc.seed = seed;
  return generate_synthetic(sc);
}

// One hidden unit whose cell grows by 0.1 per event; D maps h to
// sigmoid(5.7 - 10h), which first drops to 0.5 or below at step 7.
OcanModel ramp_model() {
  OcanModel m;
  m.encoder = EncoderKind::kLstm;
  m.input_width = 1;
  m.lstm = LstmAutoencoder::zeros(1, 1, OutputActivation::kSigmoid);
  ParamGroup& p = m.lstm->params();
  p.value("enc.b_c")(0, 0) = 30.0;
  p.value("enc.b_i")(0, 0) = std::log(0.1 / 0.9);
  p.value("enc.b_f")(0, 0) = 30.0;
  p.value("enc.b_o")(0, 0) = 30.0;
  m.discriminator = Discriminator::zeros(1, 1, 1);
  ParamGroup& d = m.discriminator->params();
  d.value("D.W1")(0, 0) = 1.0;
  d.value("D.W2")(0, 0) = 1.0;
  d.value("D.W3")(0, 0) = -10.0;
  d.value("D.b3")(0, 0) = 5.7;
  return m;
}

TEST(LabelRule, ThresholdAndTies) {
  EXPECT_EQ(label_for(0.7, 0.5), Label::kBenign);
  EXPECT_EQ(label_for(0.5, 0.5), Label::kMalicious);
  EXPECT_EQ(label_for(0.2, 0.5), Label::kMalicious);
  // Raising the threshold never turns a malicious label benign.
  for (double p = 0.0; p <= 1.0; p += 0.05) {
    for (double t = 0.0; t + 0.1 <= 1.0; t += 0.1) {
      if (label_for(p, t) == Label::kMalicious) EXPECT_EQ(label_for(p, t + 0.1), Label::kMalicious);
    }
  }
}

TEST(Detector, ZeroDiscriminatorFlagsEveryone) {
  OcanModel m = random_model(4, 8, 1);
  m.discriminator = Discriminator::zeros(8);
  FraudDetector det(m);
  for (const auto& p : det.score_batch(synthetic(5, 2).sequences)) {
    EXPECT_EQ(p.p_benign, 0.5);
    EXPECT_EQ(p.label, Label::kMalicious);
  }
}

TEST(Detector, BatchEqualsPerUserAndFollowsPermutation) {
  FraudDetector det(random_model(4, 8, 3));
  SequenceCorpus c = synthetic(20, 4);
  const auto preds = det.score_batch(c.sequences);
  ASSERT_EQ(preds.size(), 40u);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const Prediction one = det.detect_user(c.sequences[i]);
    EXPECT_EQ(one.id, preds[i].id);
    EXPECT_EQ(one.p_benign, preds[i].p_benign);
    EXPECT_EQ(one.label, preds[i].label);
  }
  std::vector<ActivitySequence> reversed(c.sequences.rbegin(), c.sequences.rend());
  const auto rev = det.score_batch(reversed);
  for (std::size_t i = 0; i < preds.size(); ++i) EXPECT_EQ(rev[preds.size() - 1 - i].p_benign, preds[i].p_benign);
  const std::vector<ActivitySequence> single = {c.sequences[3]};
  EXPECT_EQ(det.score_batch(single)[0].p_benign, preds[3].p_benign);
}

TEST(Detector, EarlyDetectionMatchesPrefixScores) {
  FraudDetector det(random_model(4, 16, 5));
  for (const auto& s : synthetic(10, 6).sequences) {
    const EarlyDetection e = det.early_detect(s);
    ASSERT_EQ(static_cast<Index>(e.steps.size()), s.length());
    for (Index t = 0; t < s.length(); ++t) {
      ActivitySequence prefix{s.user_id, Tensor(s.steps.matrix().topRows(t + 1))};
      EXPECT_EQ(e.steps[t].step, t + 1);
      ASSERT_EQ(e.steps[t].p_benign, det.detect_user(prefix).p_benign);
    }
  }
}

TEST(Detector, FirstFlagIsFirstCrossing) {
  FraudDetector det(ramp_model());
  ActivitySequence s{"ramp", Tensor(12, 1)};
  const EarlyDetection e = det.early_detect(s, 0.5);
  ASSERT_TRUE(e.first_flag.has_value());
  EXPECT_EQ(*e.first_flag, 7);
  for (const auto& st : e.steps) EXPECT_EQ(st.flagged, st.step >= 7);
  for (std::size_t i = 1; i < e.steps.size(); ++i) EXPECT_LT(e.steps[i].p_benign, e.steps[i - 1].p_benign);
  EXPECT_GT(e.steps[5].p_benign, 0.5);
  EXPECT_LE(e.steps[6].p_benign, 0.5);
}

TEST(Detector, StreamRejectsOutOfOrderSteps) {
  FraudDetector det(random_model(4, 8, 7));
  DetectorStream s = det.stream();
  const double x[] = {1, 0, 0, 1};
  s.push(1, x);
  s.push(2, x);
  EXPECT_THROW(s.push(2, x), ArgumentError);
  EXPECT_THROW(s.push(1, x), ArgumentError);
  const double bad[] = {1, 0};
  EXPECT_THROW(s.push(3, bad), ShapeError);
}

TEST(Detector, RejectsBadThresholdsAndWidths) {
  OcanModel m = random_model(4, 8, 8);
  EXPECT_THROW(FraudDetector(m, 1.5), ArgumentError);
  FraudDetector det(m);
  EXPECT_THROW(det.stream(-0.1), ArgumentError);
  EXPECT_THROW(det.detect_user(test::make_seq("u", {{1, 0, 1}})), ShapeError);
}

TEST(Detector, RepresentationWidthMismatchIsRejected) {
  OcanModel m = random_model(4, 8, 9);
  SeededRng rng(10);
  m.discriminator = Discriminator::random(7, rng);
  EXPECT_THROW(FraudDetector{m}, CheckpointError);
}

TEST(Checkpoint, ModelRoundTripIsBitExact) {
  OcanModel m = random_model(4, 8, 11);
  const std::string bytes = encode_checkpoint(model_checkpoint(m));
  OcanModel back = model_from_checkpoint(decode_checkpoint(bytes, "mem"));
  EXPECT_TRUE(back.lstm->params().same_values(m.lstm->params()));
  EXPECT_TRUE(back.discriminator->params().same_values(m.discriminator->params()));
  EXPECT_TRUE(back.generator->params().same_values(m.generator->params()));
  EXPECT_TRUE(back.proxy->discriminator.params().same_values(m.proxy->discriminator.params()));
  EXPECT_EQ(back.proxy->epsilon, 0.25);
  EXPECT_EQ(back.meta.at("seed"), "11");
  EXPECT_EQ(encode_checkpoint(model_checkpoint(back)), bytes);

  FraudDetector a(m), b(back);
  for (const auto& s : synthetic(5, 12).sequences) EXPECT_EQ(a.detect_user(s).p_benign, b.detect_user(s).p_benign);
}

TEST(Checkpoint, FileRoundTripAndKindCheck) {
  const auto dir = std::filesystem::temp_directory_path() / "ocan_detector_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.ckpt").string();
  OcanModel m = random_model(3, 5, 13);
  save_checkpoint(path, model_checkpoint(m));
  EXPECT_NO_THROW(model_from_checkpoint(load_checkpoint(path, "ocan-model")));
  EXPECT_THROW(load_checkpoint(path, "autoencoder"), CheckpointError);
  EXPECT_THROW(encoder_from_checkpoint(load_checkpoint(path)), CheckpointError);
  EXPECT_THROW(load_checkpoint((dir / "missing.ckpt").string()), IoError);
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, CorruptBytesAreRejected) {
  const std::string bytes = encode_checkpoint(model_checkpoint(random_model(3, 5, 14)));
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3), "cut"), CheckpointError);
  EXPECT_THROW(decode_checkpoint("NOTACKPT" + bytes.substr(8), "magic"), CheckpointError);
  EXPECT_THROW(decode_checkpoint(bytes + "x", "tail"), CheckpointError);
}

TEST(Checkpoint, MismatchedComponentsFailAtLoad) {
  OcanModel m = random_model(4, 8, 15);
  Checkpoint ckpt = model_checkpoint(m);
  ParamGroup swapped;
  for (const auto& e : ckpt.tensors) {
    swapped.add(e.name, e.name == "gan.D.W1" ? Tensor(6, e.value.cols()) : e.value);
  }
  ckpt.tensors = swapped;
  EXPECT_THROW(model_from_checkpoint(ckpt), CheckpointError);
}

TEST(Checkpoint, AutoencoderRoundTrip) {
  SeededRng rng(16);
  LstmAutoencoder ae = LstmAutoencoder::random(4, 6, OutputActivation::kSigmoid, rng);
  OcanModel enc = encoder_from_checkpoint(decode_checkpoint(encode_checkpoint(autoencoder_checkpoint(ae)), "mem"));
  ASSERT_TRUE(enc.lstm.has_value());
  EXPECT_TRUE(enc.lstm->params().same_values(ae.params()));
  EXPECT_EQ(enc.representation_width(), 6);
}

TEST(Detector, ScoresSixThousandUsersQuickly) {
  FraudDetector det(random_model(4, 200, 17));
  const SequenceCorpus c = synthetic(3000, 18);
  const auto start = std::chrono::steady_clock::now();
  const auto preds = det.score_batch(c.sequences);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(preds.size(), 6000u);
  EXPECT_LT(secs, 60.0);
}

}  // namespace
}  // namespace ocan
