#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ocan/autoencoder.hpp"
#include "ocan/checkpoint.hpp"
#include "ocan/data_io.hpp"
#include "ocan/detector.hpp"
#include "ocan/errors.hpp"
#include "ocan/eval.hpp"
#include "ocan/fileio.hpp"
#include "ocan/gan.hpp"
#include "ocan/rng.hpp"

namespace ocan::cli {
namespace {

// ---------------------------------------------------------------------------
// Shared option groups

struct DataOptions {
  std::string input;
  std::string format = "sequences";
  bool no_length_filter = false;
  Index min_length = 4;
  Index max_length = 50;
};

void add_data_options(CLI::App* sc, DataOptions& d, bool required = true) {
  auto* in = sc->add_option("-i,--input", d.input, "Input dataset (CSV)");
  if (required) in->required();
  sc->add_option("--format", d.format, "Dataset format")
      ->check(CLI::IsMember({"sequences", "vectors", "creditcard"}));
  sc->add_flag("--no-length-filter", d.no_length_filter, "Keep sequences of every length");
  sc->add_option("--min-length", d.min_length, "Shortest sequence kept");
  sc->add_option("--max-length", d.max_length, "Longest sequence kept");
}

struct Dataset {
  bool sequences = true;
  SequenceCorpus seq;
  VectorDataset vec;

  bool has_labels() const { return sequences ? seq.has_labels() : vec.has_labels(); }
  const std::vector<Label>& labels() const { return sequences ? seq.labels : vec.labels; }
  std::size_t size() const { return sequences ? seq.size() : vec.size(); }
  const std::string& id(std::size_t i) const { return sequences ? seq.sequences[i].user_id : vec.ids[i]; }
};

Dataset load_dataset(const DataOptions& d) {
  Dataset out;
  if (d.format == "sequences") {
    out.seq = load_sequences(d.input, LengthFilter{!d.no_length_filter, d.min_length, d.max_length});
  } else {
    out.sequences = false;
    out.vec = d.format == "creditcard" ? load_creditcard(d.input) : load_vectors(d.input);
  }
  if (out.size() == 0) throw ArgumentError(d.input + ": no usable records");
  return out;
}

// Benign rows only when labels are present.
Dataset benign_only(const Dataset& d, std::ostream& out) {
  if (!d.has_labels()) return d;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.labels()[i] == Label::kBenign) keep.push_back(i);
  }
  if (keep.empty()) throw ArgumentError("the input has labels but no benign records to train on");
  out << "labels present: training on " << keep.size() << " of " << d.size() << " records (benign only)\n";
  Dataset r;
  r.sequences = d.sequences;
  if (d.sequences) {
    for (std::size_t i : keep) r.seq.sequences.push_back(d.seq.sequences[i]);
  } else {
    r.vec = select_rows(d.vec, keep);
    r.vec.labels.clear();
  }
  return r;
}

struct AeOptions {
  std::optional<Index> hidden;
  int epochs = 20;
  std::size_t batch = 32;
  double lr = 1e-3;
  std::string activation;
};

void add_ae_options(CLI::App* sc, AeOptions& a, bool epochs_alias) {
  sc->add_option("--hidden", a.hidden, "Representation width [default: 200 for sequences, 50 for vectors]");
  sc->add_option(epochs_alias ? "--ae-epochs,--epochs" : "--ae-epochs", a.epochs, "Autoencoder training epochs");
  sc->add_option("--ae-batch", a.batch, "Autoencoder minibatch size")->check(CLI::PositiveNumber);
  sc->add_option("--ae-lr", a.lr, "Autoencoder Adam learning rate");
  sc->add_option("--activation", a.activation,
                 "LSTM reconstruction head [default: sigmoid]")
      ->check(CLI::IsMember({"sigmoid", "identity"}));
}

AutoencoderConfig ae_config(const AeOptions& a, bool sequences, std::uint64_t seed) {
  AutoencoderConfig c;
  c.hidden = a.hidden.value_or(sequences ? 200 : 50);
  c.epochs = a.epochs;
  c.batch_size = a.batch;
  c.adam.learning_rate = a.lr;
  c.seed = seed;
  if (!a.activation.empty()) c.output = output_activation_from_string(a.activation);
  return c;
}

struct GanOptions {
  int epochs = 50;
  std::size_t batch = 32;
  Index noise = 50;
  int quantile_k = 5;
  double lr = 1e-3;
  std::string regular_objective = "non-saturating";
};

void add_gan_options(CLI::App* sc, GanOptions& g, bool epochs_alias) {
  sc->add_option(epochs_alias ? "--gan-epochs,--epochs" : "--gan-epochs", g.epochs, "GAN training epochs");
  sc->add_option("--batch", g.batch, "GAN minibatch size")->check(CLI::Range(2, 1 << 20));
  sc->add_option("--noise", g.noise, "Generator noise width")->check(CLI::PositiveNumber);
  sc->add_option("--quantile-k", g.quantile_k, "Density threshold: the 1/k lower quantile")
      ->check(CLI::Range(2, 1 << 20));
  sc->add_option("--gan-lr", g.lr, "GAN Adam learning rate");
  sc->add_option("--regular-objective", g.regular_objective, "Generator objective of the regular GAN")
      ->check(CLI::IsMember({"saturating", "non-saturating"}));
}

GanConfig gan_config(const GanOptions& g, std::uint64_t seed) {
  GanConfig c;
  c.epochs = g.epochs;
  c.batch_size = g.batch;
  c.noise_dim = g.noise;
  c.quantile_k = g.quantile_k;
  c.adam.learning_rate = g.lr;
  c.regular_objective = generator_objective_from_string(g.regular_objective);
  c.seed = seed;
  c.validate();
  return c;
}

struct SplitOptions {
  std::size_t train_benign = 2000;
  std::size_t test_benign = 600;
  std::size_t test_malicious = 600;
};

void add_split_options(CLI::App* sc, SplitOptions& s) {
  sc->add_option("--train-benign", s.train_benign, "Benign records in the training split");
  sc->add_option("--test-benign", s.test_benign, "Benign records in the test split");
  sc->add_option("--test-malicious", s.test_malicious, "Malicious records in the test split");
}

void add_seed(CLI::App* sc, std::uint64_t& seed) {
  sc->add_option("--seed", seed, "Random seed")->envname("OCAN_SEED");
}

// ---------------------------------------------------------------------------
// Models and representations

OcanModel load_encoder(const std::string& path, const Dataset& data) {
  if (path == "identity") {
    if (data.sequences) throw ArgumentError("the identity encoder only applies to vector data");
    OcanModel m;
    m.encoder = EncoderKind::kIdentity;
    m.input_width = data.vec.features.cols();
    return m;
  }
  OcanModel m = encoder_from_checkpoint(load_checkpoint(path));
  if (data.sequences != (m.encoder == EncoderKind::kLstm)) {
    throw CheckpointError(path + ": a '" + to_string(m.encoder) + "' encoder cannot read " +
                          (data.sequences ? "sequence" : "vector") + " data");
  }
  return m;
}

Tensor represent(const OcanModel& m, const Dataset& data) {
  if (data.sequences) {
    for (const auto& s : data.seq.sequences) {
      if (s.width() != m.input_width) {
        throw CheckpointError("user '" + s.user_id + "' has width " + std::to_string(s.width()) +
                              ", the encoder expects " + std::to_string(m.input_width));
      }
    }
    return m.lstm->encoder().encode_all(data.seq.sequences);
  }
  if (data.vec.features.cols() != m.input_width) {
    throw CheckpointError("data has width " + std::to_string(data.vec.features.cols()) + ", the encoder expects " +
                          std::to_string(m.input_width));
  }
  if (m.encoder == EncoderKind::kPlain) return m.plain->encode(data.vec.features);
  return data.vec.features;
}

Tensor select(const Tensor& t, std::span<const std::size_t> rows) {
  Tensor out(static_cast<Index>(rows.size()), t.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.matrix().row(static_cast<Index>(k)) = t.matrix().row(static_cast<Index>(rows[k]));
  }
  return out;
}

std::string label_name(Label l) { return l == Label::kBenign ? "benign" : "malicious"; }

std::string gan_log_csv(const std::vector<GanEpochStats>& log) {
  std::string s = "epoch,d_objective,g_loss,mean_p_real,mean_p_fake\n";
  for (const auto& e : log) {
    s += std::to_string(e.epoch) + "," + format_double(e.d_objective) + "," + format_double(e.g_loss) + "," +
         format_double(e.mean_p_real) + "," + format_double(e.mean_p_fake) + "\n";
  }
  return s;
}

void record_gan_meta(OcanModel& m, const GanConfig& c, const std::string& mode) {
  m.meta["gan.mode"] = mode;
  m.meta["gan.seed"] = std::to_string(c.seed);
  m.meta["gan.epochs"] = std::to_string(c.epochs);
  m.meta["gan.batch"] = std::to_string(c.batch_size);
  m.meta["gan.noise"] = std::to_string(c.noise_dim);
  m.meta["gan.quantile_k"] = std::to_string(c.quantile_k);
  m.meta["gan.lr"] = format_double(c.adam.learning_rate);
  m.meta["gan.regular_objective"] = to_string(c.regular_objective);
}

// ---------------------------------------------------------------------------
// Subcommands

struct GenSyntheticCmd {
  SyntheticConfig config;
  std::string output, train_output, test_output;
  SplitOptions split;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    auto* sc = app.add_subcommand("gen-synthetic", "Generate a labelled synthetic activity corpus");
    sc->add_option("-o,--output", output, "Full corpus output path");
    sc->add_option("--benign-users", config.benign_users, "Benign users");
    sc->add_option("--malicious-users", config.malicious_users, "Malicious users");
    sc->add_option("--min-length", config.min_length, "Shortest sequence");
    sc->add_option("--max-length", config.max_length, "Longest sequence");
    sc->add_option("--benign-p", config.benign_p, "Benign per-feature Bernoulli probabilities")->delimiter(',');
    sc->add_option("--malicious-p", config.malicious_p, "Malicious per-feature Bernoulli probabilities")
        ->delimiter(',');
    sc->add_option("--benign-drift", config.benign_drift, "Benign per-feature drift over a sequence")
        ->delimiter(',');
    sc->add_option("--malicious-drift", config.malicious_drift, "Malicious per-feature drift over a sequence")
        ->delimiter(',');
    sc->add_option("--benign-persistence", config.benign_persistence,
                   "Probability a benign feature repeats its previous value");
    sc->add_option("--malicious-persistence", config.malicious_persistence,
                   "Probability a malicious feature repeats its previous value");
    sc->add_option("--overlap", config.overlap, "Mix of benign parameters into the malicious class, in [0,1]");
    sc->add_option("--train-output", train_output, "Also write a benign-only training split here");
    sc->add_option("--test-output", test_output, "Also write the labelled test split here");
    add_split_options(sc, split);
    add_seed(sc, seed);
    sc->callback([this] {
      if (output.empty() && train_output.empty()) {
        throw CLI::RequiredError("--output or --train-output");
      }
      if (train_output.empty() != test_output.empty()) {
        throw CLI::ValidationError("--train-output", "--train-output and --test-output go together");
      }
    });
  }

  void run(std::ostream& out) {
    config.seed = seed;
    const SequenceCorpus corpus = generate_synthetic(config);
    if (!output.empty()) {
      write_sequences(output, corpus);
      out << "wrote " << corpus.size() << " users to " << output << "\n";
    }
    if (!train_output.empty()) {
      const SequenceSplit s =
          ocan::split(corpus, {split.train_benign, split.test_benign, split.test_malicious, mix_seed(seed, 12)});
      SequenceCorpus train{s.train, std::vector<Label>(s.train.size(), Label::kBenign)};
      write_sequences(train_output, train);
      write_sequences(test_output, s.test);
      out << "wrote " << train.size() << " training users to " << train_output << " and " << s.test.size()
          << " test users to " << test_output << "\n";
    }
  }
};

struct TrainAeCmd {
  DataOptions data;
  AeOptions ae;
  std::string output, loss_log;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    auto* sc = app.add_subcommand("train-ae", "Train the LSTM (sequences) or plain (vectors) autoencoder");
    add_data_options(sc, data);
    sc->add_option("-o,--output", output, "Autoencoder checkpoint path")->required();
    add_ae_options(sc, ae, true);
    sc->add_option("--loss-log", loss_log, "Per-epoch mean loss (CSV)");
    add_seed(sc, seed);
  }

  void run(std::ostream& out) {
    const Dataset d = benign_only(load_dataset(data), out);
    const AutoencoderConfig cfg = ae_config(ae, d.sequences, seed);
    TrainingLog log;
    Checkpoint ckpt;
    if (d.sequences) {
      ckpt = autoencoder_checkpoint(train_autoencoder(d.seq.sequences, cfg, &log));
    } else {
      if (!ae.activation.empty()) throw ArgumentError("--activation applies to the LSTM autoencoder only");
      ckpt = autoencoder_checkpoint(train_plain_autoencoder(d.vec.features, cfg, &log));
    }
    ckpt.meta["ae.seed"] = std::to_string(seed);
    ckpt.meta["ae.epochs"] = std::to_string(cfg.epochs);
    ckpt.meta["ae.batch"] = std::to_string(cfg.batch_size);
    ckpt.meta["ae.lr"] = format_double(cfg.adam.learning_rate);
    save_checkpoint(output, ckpt);
    if (!loss_log.empty()) {
      std::string s = "epoch,mean_loss\n";
      for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) {
        s += std::to_string(e) + "," + format_double(log.epoch_loss[e]) + "\n";
      }
      write_file_atomic(loss_log, s);
    }
    out << "trained on " << d.size() << " records; loss " << format_double(log.epoch_loss.front()) << " -> "
        << format_double(log.epoch_loss.back()) << "; wrote " << output << "\n";
  }
};

struct TrainGanCmd {
  DataOptions data;
  GanOptions gan;
  std::string encoder, output, mode = "complementary", log_path;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    auto* sc = app.add_subcommand("train-gan",
                                  "Train the regular GAN, or the density proxy plus complementary GAN");
    add_data_options(sc, data);
    sc->add_option("-e,--encoder", encoder, "Autoencoder checkpoint, or 'identity' for raw vectors")->required();
    sc->add_option("-o,--output", output, "Model checkpoint path")->required();
    sc->add_option("--mode", mode, "GAN variant")->check(CLI::IsMember({"complementary", "regular"}));
    add_gan_options(sc, gan, true);
    sc->add_option("--log", log_path, "Per-epoch training statistics (CSV)");
    add_seed(sc, seed);
  }

  void run(std::ostream& out) {
    const Dataset d = benign_only(load_dataset(data), out);
    OcanModel model = load_encoder(encoder, d);
    const GanConfig cfg = gan_config(gan, seed);
    const Tensor reps = represent(model, d);
    record_gan_meta(model, cfg, mode);
    std::vector<GanEpochStats> log;
    if (mode == "complementary") {
      OcanNets nets = train_ocan(reps, cfg);
      model.variant = "ocan";
      model.proxy = nets.proxy;
      model.generator = nets.complementary.generator;
      model.discriminator = nets.complementary.discriminator;
      log = nets.complementary.log;
      out << "density threshold " << format_double(nets.proxy.epsilon) << "\n";
    } else {
      GanResult r = train_regular_gan(reps, proxy_config(cfg));
      model.variant = "ocan-r";
      model.generator = r.generator;
      model.discriminator = r.discriminator;
      log = r.log;
    }
    save_checkpoint(output, model_checkpoint(model));
    if (!log_path.empty()) write_file_atomic(log_path, gan_log_csv(log));
    out << "trained " << model.variant << " on " << d.size() << " records; wrote " << output << "\n";
  }
};

struct DetectCmd {
  DataOptions data;
  std::string model_path, output;
  double threshold = 0.5;

  void add(CLI::App& app) {
    auto* sc = app.add_subcommand("detect", "Score every record with a trained model");
    add_data_options(sc, data);
    sc->add_option("-m,--model", model_path, "Model checkpoint")->required();
    sc->add_option("-o,--output", output, "Predictions (CSV: id,p_benign,label)")->required();
    sc->add_option("--threshold", threshold, "Benign iff p_benign > threshold")->check(CLI::Range(0.0, 1.0));
  }

  void run(std::ostream& out) {
    const FraudDetector det(model_from_checkpoint(load_checkpoint(model_path, "ocan-model")), threshold);
    const Dataset d = load_dataset(data);
    if (d.sequences != (det.model().encoder == EncoderKind::kLstm)) {
      throw CheckpointError(model_path + ": a '" + to_string(det.model().encoder) + "' model cannot read " +
                            (d.sequences ? "sequence" : "vector") + " data");
    }
    const std::vector<Prediction> preds = d.sequences ? det.score_batch(d.seq.sequences) : det.score_vectors(d.vec);
    std::string s = "id,p_benign,label\n";
    std::size_t flagged = 0;
    for (const auto& p : preds) {
      s += p.id + "," + format_double(p.p_benign) + "," + label_name(p.label) + "\n";
      flagged += p.label == Label::kMalicious;
    }
    write_file_atomic(output, s);
    out << "scored " << preds.size() << " records, " << flagged << " flagged malicious; wrote " << output << "\n";
  }
};

struct EarlyDetectCmd {
  DataOptions data;
  std::string model_path, output;
  double flag_threshold = 0.5;

  void add(CLI::App& app) {
    auto* sc = app.add_subcommand("early-detect", "Score users after every event and report the first flag");
    add_data_options(sc, data);
    sc->add_option("-m,--model", model_path, "Model checkpoint (LSTM encoder)")->required();
    sc->add_option("-o,--output", output, "Step scores (CSV: id,step,p_benign,flagged)")->required();
    sc->add_option("--flag-threshold", flag_threshold, "Flag at the first step with p_benign <= threshold")
        ->check(CLI::Range(0.0, 1.0));
  }

  void run(std::ostream& out) {
    const FraudDetector det(model_from_checkpoint(load_checkpoint(model_path, "ocan-model")));
    const Dataset d = load_dataset(data);
    if (!d.sequences) throw ArgumentError("early detection needs sequence data");
    std::string s = "id,step,p_benign,flagged\n";
    std::size_t flagged = 0;
    for (const auto& seq : d.seq.sequences) {
      const EarlyDetection e = det.early_detect(seq, flag_threshold);
      for (const auto& st : e.steps) {
        s += seq.user_id + "," + std::to_string(st.step) + "," + format_double(st.p_benign) + "," +
             (st.flagged ? "1" : "0") + "\n";
      }
      flagged += e.first_flag.has_value();
    }
    write_file_atomic(output, s);
    out << flagged << " of " << d.size() << " users flagged; wrote " << output << "\n";
  }
};

struct EvaluateCmd {
  DataOptions data;
  std::string predictions, output, summary;
  // Protocol mode
  bool protocol = false;
  SplitOptions split;
  AeOptions ae;
  GanOptions gan;
  std::string encoder_kind;
  std::size_t runs = 10;
  std::size_t workers = 1;
  bool no_ocan_r = false;
  double threshold = 0.5;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    auto* sc = app.add_subcommand(
        "evaluate",
        "Score predictions against labels, or (--protocol) run the full train/score protocol over seeds");
    add_data_options(sc, data);
    sc->add_option("-p,--predictions", predictions, "Predictions from 'detect'");
    sc->add_option("-o,--output", output, "Metrics (key=value) or, with --protocol, the per-run report (CSV)")
        ->required();
    sc->add_flag("--protocol", protocol, "Run split -> autoencoder -> GANs -> scoring for every seed");
    sc->add_option("--summary", summary, "Protocol mode: key=value summary path");
    add_split_options(sc, split);
    add_ae_options(sc, ae, false);
    add_gan_options(sc, gan, false);
    sc->add_option("--encoder-kind", encoder_kind, "Protocol mode encoder [default: lstm for sequences, plain for vectors]")
        ->check(CLI::IsMember({"lstm", "plain", "identity"}));
    sc->add_option("--runs", runs, "Protocol mode: number of seeded runs")->check(CLI::PositiveNumber);
    sc->add_option("--workers", workers, "Protocol mode: runs executed concurrently")->check(CLI::PositiveNumber);
    sc->add_flag("--no-ocan-r", no_ocan_r, "Protocol mode: skip the regular-GAN comparison");
    sc->add_option("--threshold", threshold, "Protocol mode: benign iff p_benign > threshold")
        ->check(CLI::Range(0.0, 1.0));
    add_seed(sc, seed);
  }

  void run(std::ostream& out) {
    if (protocol) return run_protocol(out);
    if (predictions.empty()) throw CLI::RequiredError("--predictions (or --protocol)");
    const Dataset d = load_dataset(data);
    if (!d.has_labels()) throw ArgumentError(data.input + ": evaluation needs a label column");
    std::map<std::string, Label> truth;
    for (std::size_t i = 0; i < d.size(); ++i) truth[d.id(i)] = d.labels()[i];

    const std::string text = read_file(predictions);
    std::vector<Label> pred, real;
    std::vector<double> score;
    std::size_t line_no = 0, start = 0;
    while (start < text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      std::string_view line(text.data() + start, end - start);
      start = end + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line_no == 1 || line.empty()) continue;
      const auto cells = split_csv(line);
      double p = 0.0;
      if (cells.size() != 3 || !parse_double(cells[1], p) || (cells[2] != "benign" && cells[2] != "malicious")) {
        throw ParseError(predictions + ":" + std::to_string(line_no) + ": expected id,p_benign,benign|malicious");
      }
      auto it = truth.find(std::string(cells[0]));
      if (it == truth.end()) {
        throw ArgumentError(predictions + ":" + std::to_string(line_no) + ": id '" + std::string(cells[0]) +
                            "' is not in " + data.input);
      }
      pred.push_back(cells[2] == "benign" ? Label::kBenign : Label::kMalicious);
      real.push_back(it->second);
      score.push_back(1.0 - p);
    }
    if (pred.empty()) throw ArgumentError(predictions + ": no predictions");
    const Metrics m = confusion_metrics(pred, real);
    std::string s;
    s += "n=" + std::to_string(pred.size()) + "\n";
    s += "precision=" + format_double(m.precision) + "\n";
    s += "recall=" + format_double(m.recall) + "\n";
    s += "f1=" + format_double(m.f1) + "\n";
    s += "accuracy=" + format_double(m.accuracy) + "\n";
    const bool both = std::count(real.begin(), real.end(), Label::kMalicious) > 0 &&
                      std::count(real.begin(), real.end(), Label::kBenign) > 0;
    if (both) s += "auc=" + format_double(roc_auc(score, real).auc) + "\n";
    s += "tp=" + std::to_string(m.counts.tp) + "\nfp=" + std::to_string(m.counts.fp) + "\ntn=" +
         std::to_string(m.counts.tn) + "\nfn=" + std::to_string(m.counts.fn) + "\n";
    s += std::string("precision_undefined=") + (m.precision_undefined ? "1" : "0") + "\n";
    s += std::string("recall_undefined=") + (m.recall_undefined ? "1" : "0") + "\n";
    write_file_atomic(output, s);
    out << "f1 " << format_double(m.f1) << "; wrote " << output << "\n";
  }

  void run_protocol(std::ostream& out) {
    const Dataset d = load_dataset(data);
    if (!d.has_labels()) throw ArgumentError(data.input + ": the protocol needs a label column");
    ExperimentProtocol p;
    p.data = d.sequences ? DataKind::kSequences : DataKind::kVectors;
    p.sequences = d.seq;
    p.vectors = d.vec;
    p.encoder = encoder_kind.empty() ? (d.sequences ? EncoderKind::kLstm : EncoderKind::kPlain)
                                     : encoder_kind_from_string(encoder_kind);
    p.split = {split.train_benign, split.test_benign, split.test_malicious, 0};
    p.autoencoder = ae_config(ae, d.sequences, 0);
    p.gan = gan_config(gan, 0);
    p.runs = runs;
    p.seed_base = seed;
    p.run_ocan_r = !no_ocan_r;
    p.threshold = threshold;
    p.workers = workers;
    const ExperimentReport rep = run_experiment(p, [&out](const RunResult& r) {
      out << "run " << r.run << " seed " << r.seed;
      if (!r.error.empty()) {
        out << " failed: " << r.error << "\n";
        return;
      }
      out << " ocan f1 " << format_double(r.ocan->f1);
      if (r.ocan_r) out << " ocan-r f1 " << format_double(r.ocan_r->f1);
      out << "\n";
    });
    write_file_atomic(output, format_report(rep));
    if (!summary.empty()) write_file_atomic(summary, format_summary(rep));
    out << "config " << rep.config_hash << "; wrote " << output << "\n";
  }
};

struct ProbeCmd {
  DataOptions data;
  SplitOptions split;
  GanOptions gan;
  std::string encoder, output, mode = "complementary";
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    auto* sc = app.add_subcommand(
        "probe", "Per-epoch mean p_benign of held-out benign, generated and malicious samples");
    add_data_options(sc, data);
    sc->add_option("-e,--encoder", encoder, "Autoencoder checkpoint, or 'identity' for raw vectors")->required();
    sc->add_option("-o,--output", output, "Curve file (CSV: epoch,series,mean_p_benign)")->required();
    sc->add_option("--mode", mode, "GAN variant")->check(CLI::IsMember({"complementary", "regular"}));
    add_split_options(sc, split);
    add_gan_options(sc, gan, true);
    add_seed(sc, seed);
  }

  void run(std::ostream& out) {
    const Dataset d = load_dataset(data);
    if (!d.has_labels()) throw ArgumentError(data.input + ": probes need a label column");
    const OcanModel enc = load_encoder(encoder, d);
    const SplitIndices idx =
        split_indices(d.labels(), {split.train_benign, split.test_benign, split.test_malicious, mix_seed(seed, 12)});
    const Tensor reps = represent(enc, d);
    std::vector<std::size_t> test_b, test_m;
    for (std::size_t i : idx.test) (d.labels()[i] == Label::kBenign ? test_b : test_m).push_back(i);
    TrainingProbe probe(select(reps, test_b), select(reps, test_m), test_b.size(), mix_seed(seed, 15));
    const Tensor train = select(reps, idx.train);
    const GanConfig cfg = gan_config(gan, seed);
    if (mode == "complementary") {
      train_ocan(train, cfg, probe.callback());
    } else {
      train_regular_gan(train, proxy_config(cfg), probe.callback());
    }
    write_file_atomic(output, format_probe_curves(probe.rows()));
    const ProbeRow& last = probe.rows().back();
    out << "final epoch: benign " << format_double(last.benign) << ", generated " << format_double(last.generated)
        << ", malicious " << format_double(last.malicious) << "; wrote " << output << "\n";
  }
};

// ---------------------------------------------------------------------------

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

int fail(std::ostream& err, const char* kind, int code, const std::string& message) {
  err << "ocan: error kind=" << kind << " exit=" << code << " message=" << one_line(message) << "\n";
  return code;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"One-class adversarial nets for fraud detection", "ocan"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  GenSyntheticCmd gen;
  TrainAeCmd train_ae;
  TrainGanCmd train_gan;
  DetectCmd detect;
  EarlyDetectCmd early;
  EvaluateCmd evaluate;
  ProbeCmd probe;
  gen.add(app);
  train_ae.add(app);
  train_gan.add(app);
  detect.add(app);
  early.add(app);
  evaluate.add(app);
  probe.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return fail(err, "usage", kUsage, e.what());
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "gen-synthetic") gen.run(out);
    else if (name == "train-ae") train_ae.run(out);
    else if (name == "train-gan") train_gan.run(out);
    else if (name == "detect") detect.run(out);
    else if (name == "early-detect") early.run(out);
    else if (name == "evaluate") evaluate.run(out);
    else if (name == "probe") probe.run(out);
    return kOk;
  } catch (const CLI::Error& e) {
    return fail(err, "usage", kUsage, e.what());
  } catch (const IoError& e) {
    return fail(err, "io", kIo, e.what());
  } catch (const ParseError& e) {
    return fail(err, "parse", kParse, e.what());
  } catch (const CheckpointError& e) {
    return fail(err, "checkpoint", kCheckpoint, e.what());
  } catch (const NumericError& e) {
    return fail(err, "numeric", kNumeric, e.what());
  } catch (const ArgumentError& e) {
    return fail(err, "argument", kArgument, e.what());
  } catch (const ShapeError& e) {
    return fail(err, "argument", kArgument, e.what());
  } catch (const std::exception& e) {
    return fail(err, "internal", kFailure, e.what());
  }
}

}  // namespace ocan::cli
