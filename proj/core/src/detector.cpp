#include "ocan/detector.hpp"

#include "ocan/errors.hpp"

namespace ocan {

std::string to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::kLstm: return "lstm";
    case EncoderKind::kPlain: return "plain";
    case EncoderKind::kIdentity: return "identity";
  }
  return "lstm";
}

EncoderKind encoder_kind_from_string(const std::string& s) {
  if (s == "lstm") return EncoderKind::kLstm;
  if (s == "plain") return EncoderKind::kPlain;
  if (s == "identity") return EncoderKind::kIdentity;
  throw ArgumentError("unknown encoder kind '" + s + "' (expected lstm|plain|identity)");
}

// ---------------------------------------------------------------------------
// OcanModel

Index OcanModel::representation_width() const {
  switch (encoder) {
    case EncoderKind::kLstm: return lstm ? lstm->hidden() : 0;
    case EncoderKind::kPlain: return plain ? plain->repr_width() : 0;
    case EncoderKind::kIdentity: return input_width;
  }
  return 0;
}

void OcanModel::validate() const {
  if (encoder == EncoderKind::kLstm && !lstm) throw CheckpointError("model declares an LSTM encoder but has none");
  if (encoder == EncoderKind::kPlain && !plain) throw CheckpointError("model declares a plain encoder but has none");
  if (input_width <= 0) throw CheckpointError("model has no input width");
  if (lstm && lstm->input_width() != input_width) {
    throw CheckpointError("LSTM encoder input width " + std::to_string(lstm->input_width()) +
                          " does not match model input width " + std::to_string(input_width));
  }
  if (plain && plain->input_width() != input_width) {
    throw CheckpointError("plain encoder input width " + std::to_string(plain->input_width()) +
                          " does not match model input width " + std::to_string(input_width));
  }
  const Index h = representation_width();
  if (discriminator && discriminator->input_width() != h) {
    throw CheckpointError("discriminator expects width " + std::to_string(discriminator->input_width()) +
                          " but the encoder produces width " + std::to_string(h));
  }
  if (generator && generator->output_width() != h) {
    throw CheckpointError("generator produces width " + std::to_string(generator->output_width()) +
                          " but representations have width " + std::to_string(h));
  }
  if (proxy && proxy->discriminator.input_width() != h) {
    throw CheckpointError("density proxy expects width " + std::to_string(proxy->discriminator.input_width()) +
                          " but representations have width " + std::to_string(h));
  }
}

namespace {

void put_prefixed(ParamGroup& out, const ParamGroup& in, const std::string& prefix) {
  for (const auto& e : in) out.add(prefix + e.name, e.value);
}

bool has_prefix(const ParamGroup& g, const std::string& prefix) {
  for (const auto& e : g) {
    if (e.name.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

template <typename F>
auto rethrow_as_checkpoint(F&& f) {
  try {
    return f();
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError(std::string("incompatible checkpoint: ") + e.what());
  }
}

void write_encoder(Checkpoint& ckpt, const OcanModel& m, const std::string& prefix) {
  ckpt.set("encoder", to_string(m.encoder));
  ckpt.set_number("input_width", static_cast<double>(m.input_width));
  if (m.lstm) {
    ckpt.set("output", to_string(m.lstm->output()));
    put_prefixed(ckpt.tensors, m.lstm->params(), prefix);
  }
  if (m.plain) put_prefixed(ckpt.tensors, m.plain->params(), prefix);
}

void read_encoder(const Checkpoint& ckpt, OcanModel& m, const std::string& prefix) {
  m.encoder = encoder_kind_from_string(ckpt.get("encoder"));
  m.input_width = static_cast<Index>(ckpt.get_number("input_width"));
  if (m.encoder == EncoderKind::kLstm) {
    m.lstm = LstmAutoencoder::from_params(ckpt.tensors.extract_prefixed(prefix),
                                          output_activation_from_string(ckpt.get("output")));
  } else if (m.encoder == EncoderKind::kPlain) {
    m.plain = PlainAutoencoder::from_params(ckpt.tensors.extract_prefixed(prefix));
  }
}

}  // namespace

Checkpoint autoencoder_checkpoint(const LstmAutoencoder& ae) {
  OcanModel m;
  m.encoder = EncoderKind::kLstm;
  m.input_width = ae.input_width();
  m.lstm = ae;
  Checkpoint ckpt;
  ckpt.kind = "autoencoder";
  write_encoder(ckpt, m, "");
  return ckpt;
}

Checkpoint autoencoder_checkpoint(const PlainAutoencoder& ae) {
  OcanModel m;
  m.encoder = EncoderKind::kPlain;
  m.input_width = ae.input_width();
  m.plain = ae;
  Checkpoint ckpt;
  ckpt.kind = "autoencoder";
  write_encoder(ckpt, m, "");
  return ckpt;
}

OcanModel encoder_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "autoencoder") {
    throw CheckpointError("expected an 'autoencoder' checkpoint, found '" + ckpt.kind + "'");
  }
  return rethrow_as_checkpoint([&] {
    OcanModel m;
    read_encoder(ckpt, m, "");
    m.meta = ckpt.meta;
    m.validate();
    return m;
  });
}

Checkpoint model_checkpoint(const OcanModel& model) {
  model.validate();
  if (!model.discriminator) throw ArgumentError("model has no discriminator to save");
  Checkpoint ckpt;
  ckpt.kind = "ocan-model";
  ckpt.meta = model.meta;
  ckpt.set("variant", model.variant);
  write_encoder(ckpt, model, "encoder.");
  put_prefixed(ckpt.tensors, model.discriminator->params(), "gan.");
  if (model.generator) put_prefixed(ckpt.tensors, model.generator->params(), "gan.");
  if (model.proxy) {
    ckpt.set_number("epsilon", model.proxy->epsilon);
    put_prefixed(ckpt.tensors, model.proxy->discriminator.params(), "proxy.");
  }
  return ckpt;
}

OcanModel model_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "ocan-model") {
    throw CheckpointError("expected an 'ocan-model' checkpoint, found '" + ckpt.kind + "'");
  }
  return rethrow_as_checkpoint([&] {
    OcanModel m;
    m.meta = ckpt.meta;
    m.variant = ckpt.get("variant");
    m.meta.erase("variant");
    read_encoder(ckpt, m, "encoder.");
    const ParamGroup gan = ckpt.tensors.extract_prefixed("gan.");
    ParamGroup d, g;
    for (const auto& e : gan) (e.name.rfind("D.", 0) == 0 ? d : g).add(e.name, e.value);
    m.discriminator = Discriminator::from_params(std::move(d));
    if (!g.empty()) m.generator = Generator::from_params(std::move(g));
    if (has_prefix(ckpt.tensors, "proxy.")) {
      m.proxy = DensityProxy{Discriminator::from_params(ckpt.tensors.extract_prefixed("proxy.")),
                             ckpt.get_number("epsilon")};
    }
    for (const char* k : {"encoder", "input_width", "output", "epsilon"}) m.meta.erase(k);
    m.validate();
    return m;
  });
}

// ---------------------------------------------------------------------------
// FraudDetector

FraudDetector::FraudDetector(OcanModel model, double threshold)
    : model_(std::move(model)), threshold_(threshold) {
  model_.validate();
  if (!model_.discriminator) throw ArgumentError("detector needs a discriminator");
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ArgumentError("decision threshold must lie in [0,1], got " + std::to_string(threshold));
  }
  if (model_.lstm) encoder_ = model_.lstm->encoder();
}

void FraudDetector::require_lstm(const char* what) const {
  if (model_.encoder != EncoderKind::kLstm) {
    throw ArgumentError(std::string(what) + " needs an LSTM encoder; this model uses '" +
                        to_string(model_.encoder) + "'");
  }
}

Tensor FraudDetector::represent(const ActivitySequence& seq) const {
  require_lstm("sequence scoring");
  if (seq.width() != model_.input_width) {
    throw ShapeError("user '" + seq.user_id + "' has width " + std::to_string(seq.width()) +
                     ", model expects " + std::to_string(model_.input_width));
  }
  return encoder_.encode(seq);
}

Tensor FraudDetector::represent(const Tensor& rows) const {
  if (rows.cols() != model_.input_width) {
    throw ShapeError("input width " + std::to_string(rows.cols()) + ", model expects " +
                     std::to_string(model_.input_width));
  }
  switch (model_.encoder) {
    case EncoderKind::kPlain: return model_.plain->encode(rows);
    case EncoderKind::kIdentity: return rows;
    case EncoderKind::kLstm: break;
  }
  throw ArgumentError("vector scoring needs a plain or identity encoder; this model uses 'lstm'");
}

double FraudDetector::p_benign(const Tensor& representation) const {
  return model_.discriminator->p_benign(representation)(0, 0);
}

Prediction FraudDetector::detect_user(const ActivitySequence& seq) const {
  const double p = p_benign(represent(seq));
  return {seq.user_id, p, label_for(p, threshold_)};
}

std::vector<Prediction> FraudDetector::score_batch(std::span<const ActivitySequence> corpus) const {
  std::vector<Prediction> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) out.push_back(detect_user(s));
  return out;
}

std::vector<Prediction> FraudDetector::score_vectors(const VectorDataset& data) const {
  const Tensor reps = represent(data.features);
  std::vector<Prediction> out;
  out.reserve(data.size());
  for (Index i = 0; i < reps.rows(); ++i) {
    const double p = p_benign(Tensor::row(reps.row_span(i)));
    out.push_back({data.ids[static_cast<std::size_t>(i)], p, label_for(p, threshold_)});
  }
  return out;
}

DetectorStream::DetectorStream(const FraudDetector& det, double flag_threshold)
    : det_(&det), flag_threshold_(flag_threshold) {
  det.require_lstm("early detection");
  if (!(flag_threshold >= 0.0 && flag_threshold <= 1.0)) {
    throw ArgumentError("flag threshold must lie in [0,1], got " + std::to_string(flag_threshold));
  }
  state_ = det.encoder_.start();
}

StepScore DetectorStream::push(Index step, std::span<const double> x) {
  if (step <= last_step_) {
    throw ArgumentError("out-of-order event: step " + std::to_string(step) + " after step " +
                        std::to_string(last_step_));
  }
  if (static_cast<Index>(x.size()) != det_->model_.input_width) {
    throw ShapeError("event has width " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(det_->model_.input_width));
  }
  det_->encoder_.push(state_, x);
  last_step_ = step;
  const double p = det_->p_benign(Tensor(state_.h));
  if (!first_flag_ && p <= flag_threshold_) first_flag_ = step;
  return {step, p, first_flag_.has_value()};
}

EarlyDetection FraudDetector::early_detect(const ActivitySequence& seq, double flag_threshold) const {
  DetectorStream s = stream(flag_threshold);
  EarlyDetection out;
  out.id = seq.user_id;
  for (Index t = 0; t < seq.length(); ++t) out.steps.push_back(s.push(t + 1, seq.steps.row_span(t)));
  out.first_flag = s.first_flag();
  return out;
}

}  // namespace ocan
