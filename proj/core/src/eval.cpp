#include "ocan/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <thread>

#include "ocan/errors.hpp"
#include "ocan/fileio.hpp"
#include "ocan/rng.hpp"

namespace ocan {

// ---------------------------------------------------------------------------
// Metrics

Metrics metrics_from_counts(const ConfusionCounts& c) {
  Metrics m;
  m.counts = c;
  const std::size_t pred_pos = c.tp + c.fp;
  const std::size_t real_pos = c.tp + c.fn;
  if (pred_pos == 0) {
    m.precision_undefined = true;
  } else {
    m.precision = static_cast<double>(c.tp) / static_cast<double>(pred_pos);
  }
  if (real_pos == 0) {
    m.recall_undefined = true;
  } else {
    m.recall = static_cast<double>(c.tp) / static_cast<double>(real_pos);
  }
  if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  if (c.total() > 0) m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  return m;
}

Metrics confusion_metrics(std::span<const Label> predicted, std::span<const Label> truth) {
  if (predicted.size() != truth.size()) {
    throw ArgumentError("confusion_metrics: " + std::to_string(predicted.size()) + " predictions for " +
                        std::to_string(truth.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool pred_mal = predicted[i] == Label::kMalicious;
    const bool real_mal = truth[i] == Label::kMalicious;
    if (pred_mal && real_mal) ++c.tp;
    else if (pred_mal) ++c.fp;
    else if (real_mal) ++c.fn;
    else ++c.tn;
  }
  return metrics_from_counts(c);
}

RocCurve roc_auc(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) {
    throw ArgumentError("roc_auc: " + std::to_string(scores.size()) + " scores for " +
                        std::to_string(labels.size()) + " labels");
  }
  std::size_t pos = 0;
  for (Label l : labels) pos += l == Label::kMalicious;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw ArgumentError("roc_auc needs both classes; got a single-class input");
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericError("roc_auc: non-finite score");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      (labels[order[i]] == Label::kMalicious ? tp : fp) += 1;
    }
    const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
    const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
    const auto [x0, y0] = roc.points.back();
    roc.auc += (fpr - x0) * (tpr + y0) / 2.0;
    roc.points.emplace_back(fpr, tpr);
  }
  return roc;
}

// ---------------------------------------------------------------------------
// Nearest-neighbour baseline

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

std::pair<Index, double> nearest(const Tensor& set, std::span<const double> z, Index skip) {
  Index best = -1;
  double best_d = 0.0;
  for (Index i = 0; i < set.rows(); ++i) {
    if (i == skip) continue;
    const double d = squared_distance(set.row_span(i), z);
    if (best < 0 || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return {best, best_d};
}

}  // namespace

std::vector<Label> ocnn_baseline(const Tensor& train, const Tensor& test, double threshold) {
  if (train.rows() < 2) {
    throw ArgumentError("ocnn_baseline needs at least 2 training points, got " + std::to_string(train.rows()));
  }
  if (test.rows() > 0 && test.cols() != train.cols()) {
    throw ShapeError("ocnn_baseline: train width " + std::to_string(train.cols()) + ", test width " +
                     std::to_string(test.cols()));
  }
  std::vector<double> own(static_cast<std::size_t>(train.rows()), -1.0);
  std::vector<Label> out;
  out.reserve(static_cast<std::size_t>(test.rows()));
  for (Index r = 0; r < test.rows(); ++r) {
    const auto [u, d1sq] = nearest(train, test.row_span(r), -1);
    double& d2 = own[static_cast<std::size_t>(u)];
    if (d2 < 0.0) d2 = std::sqrt(nearest(train, train.row_span(u), u).second);
    out.push_back(std::sqrt(d1sq) - d2 > threshold ? Label::kMalicious : Label::kBenign);
  }
  return out;
}

// ---------------------------------------------------------------------------
// DBSCAN

double mean_pairwise_distance(const Tensor& points) {
  const Index n = points.rows();
  if (n < 2) throw ArgumentError("mean pairwise distance needs at least 2 points");
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) total += std::sqrt(squared_distance(points.row_span(i), points.row_span(j)));
  }
  return total / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

std::size_t scaled_min_pts(std::size_t n) {
  const auto v = static_cast<std::size_t>(std::llround(180.0 * static_cast<double>(n) / 9000.0));
  return std::max<std::size_t>(1, v);
}

ClusterReport dbscan_cluster(const Tensor& points, double eps, std::size_t min_pts, std::span<const Label> labels) {
  const Index n = points.rows();
  if (n == 0) throw ArgumentError("dbscan_cluster: empty input");
  if (!(eps > 0.0)) throw ArgumentError("dbscan_cluster: eps must be positive");
  if (min_pts < 1) throw ArgumentError("dbscan_cluster: min_pts must be at least 1");
  if (!labels.empty() && static_cast<Index>(labels.size()) != n) {
    throw ArgumentError("dbscan_cluster: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                        " points");
  }
  const double eps2 = eps * eps;
  std::vector<std::vector<Index>> nbrs(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (squared_distance(points.row_span(i), points.row_span(j)) <= eps2) nbrs[i].push_back(j);
    }
  }
  constexpr int kUnvisited = -2;
  ClusterReport rep;
  rep.assignment.assign(static_cast<std::size_t>(n), kUnvisited);
  for (Index i = 0; i < n; ++i) {
    if (rep.assignment[i] != kUnvisited) continue;
    if (nbrs[i].size() < min_pts) {
      rep.assignment[i] = -1;
      continue;
    }
    const int id = rep.clusters++;
    rep.assignment[i] = id;
    std::vector<Index> frontier(nbrs[i].begin(), nbrs[i].end());
    while (!frontier.empty()) {
      const Index q = frontier.back();
      frontier.pop_back();
      if (rep.assignment[q] == -1) rep.assignment[q] = id;  // border point
      if (rep.assignment[q] != kUnvisited) continue;
      rep.assignment[q] = id;
      if (nbrs[q].size() >= min_pts) frontier.insert(frontier.end(), nbrs[q].begin(), nbrs[q].end());
    }
  }

  const Index h = points.cols();
  Matrix centroids = Matrix::Zero(rep.clusters, h);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(rep.clusters), 0);
  if (!labels.empty()) rep.composition.assign(static_cast<std::size_t>(rep.clusters), {0, 0});
  for (Index i = 0; i < n; ++i) {
    const int a = rep.assignment[i];
    const bool mal = !labels.empty() && labels[i] == Label::kMalicious;
    if (a < 0) {
      ++rep.noise;
      if (!labels.empty()) (mal ? rep.noise_composition.second : rep.noise_composition.first) += 1;
      continue;
    }
    centroids.row(a) += points.matrix().row(i);
    ++sizes[a];
    if (!labels.empty()) (mal ? rep.composition[a].second : rep.composition[a].first) += 1;
  }
  for (int c = 0; c < rep.clusters; ++c) centroids.row(c) /= static_cast<double>(sizes[c]);
  rep.centroid_distances = Tensor(rep.clusters, rep.clusters);
  for (int a = 0; a < rep.clusters; ++a) {
    for (int b = 0; b < rep.clusters; ++b) {
      rep.centroid_distances(a, b) = (centroids.row(a) - centroids.row(b)).norm();
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Training probes

TrainingProbe::TrainingProbe(Tensor benign, Tensor malicious, std::size_t generated, std::uint64_t seed)
    : benign_(std::move(benign)), malicious_(std::move(malicious)) {
  if (benign_.rows() == 0 || malicious_.rows() == 0 || generated == 0) {
    throw ArgumentError("training probe needs non-empty benign, malicious and generated sets");
  }
  noise_ = Tensor(static_cast<Index>(generated), 0);
  seed_ = seed;
}

void TrainingProbe::record(int epoch, const Generator& g, const Discriminator& d) {
  if (noise_.cols() != g.noise_width()) {
    SeededRng rng(seed_);
    noise_ = sample_noise(rng, noise_.rows(), g.noise_width());
  }
  ProbeRow row;
  row.epoch = epoch;
  row.benign = d.p_benign(benign_).matrix().mean();
  row.generated = d.p_benign(g.generate(noise_)).matrix().mean();
  row.malicious = d.p_benign(malicious_).matrix().mean();
  rows_.push_back(row);
}

GanEpochCallback TrainingProbe::callback() {
  return [this](int epoch, const Generator& g, const Discriminator& d) { record(epoch, g, d); };
}

std::string format_probe_curves(std::span<const ProbeRow> rows) {
  std::string out = "epoch,series,mean_p_benign\n";
  for (const auto& r : rows) {
    const std::string e = std::to_string(r.epoch);
    out += e + ",benign," + format_double(r.benign) + "\n";
    out += e + ",generated," + format_double(r.generated) + "\n";
    out += e + ",malicious," + format_double(r.malicious) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  r.n = values.size();
  if (values.empty()) return r;
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

std::string config_hash(const std::string& canonical) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string data_fingerprint(const ExperimentProtocol& p) {
  if (p.data == DataKind::kSequences) return config_hash(format_sequences(p.sequences));
  return config_hash(format_vectors(p.vectors));
}

nlohmann::json adam_json(const AdamConfig& a) {
  return {{"lr", a.learning_rate}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.epsilon}};
}

}  // namespace

std::string protocol_json(const ExperimentProtocol& p) {
  nlohmann::json j;
  j["data"] = p.data == DataKind::kSequences ? "sequences" : "vectors";
  j["data_hash"] = data_fingerprint(p);
  j["encoder"] = to_string(p.encoder);
  j["split"] = {{"train_benign", p.split.train_benign},
                {"test_benign", p.split.test_benign},
                {"test_malicious", p.split.test_malicious}};
  j["autoencoder"] = {{"hidden", p.autoencoder.hidden},
                      {"epochs", p.autoencoder.epochs},
                      {"batch", p.autoencoder.batch_size},
                      {"output", to_string(p.autoencoder.output)},
                      {"adam", adam_json(p.autoencoder.adam)}};
  j["gan"] = {{"epochs", p.gan.epochs},
              {"batch", p.gan.batch_size},
              {"noise", p.gan.noise_dim},
              {"gen_hidden", p.gan.gen_hidden},
              {"disc_hidden", p.gan.disc_hidden},
              {"features", p.gan.features},
              {"quantile_k", p.gan.quantile_k},
              {"regular_objective", to_string(p.gan.regular_objective)},
              {"adam", adam_json(p.gan.adam)}};
  j["runs"] = p.runs;
  j["seed_base"] = p.seed_base;
  j["ocan_r"] = p.run_ocan_r;
  j["threshold"] = p.threshold;
  return j.dump();  // keys are sorted, so the dump is canonical
}

namespace {

struct Scored {
  Metrics metrics;
  double auc = 0.0;
};

Scored score(const Discriminator& d, const Tensor& reps, std::span<const Label> truth, double threshold) {
  const Tensor p = d.p_benign(reps);
  std::vector<Label> pred;
  std::vector<double> mal_score;
  for (Index i = 0; i < p.rows(); ++i) {
    pred.push_back(label_for(p(i, 0), threshold));
    mal_score.push_back(1.0 - p(i, 0));
  }
  Scored s;
  s.metrics = confusion_metrics(pred, truth);
  s.auc = roc_auc(mal_score, truth).auc;
  return s;
}

Tensor rows_with_label(const Tensor& reps, std::span<const Label> labels, Label want) {
  std::vector<Index> keep;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == want) keep.push_back(static_cast<Index>(i));
  }
  Tensor out(static_cast<Index>(keep.size()), reps.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) out.matrix().row(static_cast<Index>(k)) = reps.matrix().row(keep[k]);
  return out;
}

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw Error(std::string(name) + ": " + e.what());
  }
}

RunResult run_one(const ExperimentProtocol& p, std::size_t run) {
  const auto start = std::chrono::steady_clock::now();
  RunResult r;
  r.run = run;
  r.seed = mix_seed(p.seed_base, run);
  try {
    SplitSpec spec = p.split;
    spec.seed = mix_seed(r.seed, 12);
    AutoencoderConfig ae = p.autoencoder;
    ae.seed = mix_seed(r.seed, 13);
    GanConfig gan = p.gan;
    gan.seed = mix_seed(r.seed, 14);

    Tensor train_reps, test_reps;
    std::vector<Label> truth;
    if (p.data == DataKind::kSequences) {
      const SequenceSplit s = stage("split", [&] { return split(p.sequences, spec); });
      truth = s.test.labels;
      if (p.encoder != EncoderKind::kLstm) throw Error("encode: sequence data needs the lstm encoder");
      const LstmAutoencoder model = stage("train-ae", [&] { return train_autoencoder(s.train, ae); });
      const SequenceEncoder enc = model.encoder();
      train_reps = stage("encode", [&] { return enc.encode_all(s.train); });
      test_reps = stage("encode", [&] { return enc.encode_all(s.test.sequences); });
    } else {
      const VectorSplit s = stage("split", [&] { return split(p.vectors, spec); });
      truth = s.test.labels;
      if (p.encoder == EncoderKind::kPlain) {
        const PlainAutoencoder model =
            stage("train-ae", [&] { return train_plain_autoencoder(s.train.features, ae); });
        train_reps = model.encode(s.train.features);
        test_reps = model.encode(s.test.features);
      } else if (p.encoder == EncoderKind::kIdentity) {
        train_reps = s.train.features;
        test_reps = s.test.features;
      } else {
        throw Error("encode: vector data needs the plain or identity encoder");
      }
    }

    std::optional<TrainingProbe> probe;
    if (p.probes) {
      probe.emplace(rows_with_label(test_reps, truth, Label::kBenign),
                    rows_with_label(test_reps, truth, Label::kMalicious),
                    static_cast<std::size_t>(p.split.test_benign), mix_seed(r.seed, 15));
    }
    const OcanNets nets = stage("train-gan", [&] {
      return train_ocan(train_reps, gan, probe ? probe->callback() : GanEpochCallback{});
    });
    const Scored ocan = stage("score", [&] { return score(nets.complementary.discriminator, test_reps, truth, p.threshold); });
    r.ocan = ocan.metrics;
    r.auc_ocan = ocan.auc;
    if (p.run_ocan_r) {
      const Scored reg = stage("score", [&] { return score(nets.regular.discriminator, test_reps, truth, p.threshold); });
      r.ocan_r = reg.metrics;
      r.auc_ocan_r = reg.auc;
    }
    if (probe) r.probes = probe->rows();
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

void add_summary(ExperimentReport& rep, const std::string& model,
                 const std::function<const std::optional<Metrics>&(const RunResult&)>& get,
                 const std::function<const std::optional<double>&(const RunResult&)>& auc) {
  std::vector<double> pr, rc, f1, acc, au;
  for (const auto& r : rep.runs) {
    if (const auto& m = get(r)) {
      pr.push_back(m->precision);
      rc.push_back(m->recall);
      f1.push_back(m->f1);
      acc.push_back(m->accuracy);
    }
    if (const auto& a = auc(r)) au.push_back(*a);
  }
  if (f1.empty()) return;
  rep.summary[model + ".precision"] = mean_std(pr);
  rep.summary[model + ".recall"] = mean_std(rc);
  rep.summary[model + ".f1"] = mean_std(f1);
  rep.summary[model + ".accuracy"] = mean_std(acc);
  rep.summary[model + ".auc"] = mean_std(au);
}

}  // namespace

ExperimentReport run_experiment(const ExperimentProtocol& protocol, const RunCallback& on_run) {
  if (protocol.runs == 0) throw ArgumentError("run_experiment needs at least one run");
  protocol.gan.validate();
  ExperimentReport rep;
  rep.config = protocol_json(protocol);
  rep.config_hash = config_hash(rep.config);
  rep.runs.resize(protocol.runs);

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < protocol.runs;) {
      RunResult r = run_one(protocol, i);
      std::lock_guard lock(mu);
      if (on_run) on_run(r);
      rep.runs[i] = std::move(r);
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(protocol.workers, 1, protocol.runs);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  add_summary(rep, "ocan", [](const RunResult& r) -> const std::optional<Metrics>& { return r.ocan; },
              [](const RunResult& r) -> const std::optional<double>& { return r.auc_ocan; });
  add_summary(rep, "ocan-r", [](const RunResult& r) -> const std::optional<Metrics>& { return r.ocan_r; },
              [](const RunResult& r) -> const std::optional<double>& { return r.auc_ocan_r; });
  return rep;
}

namespace {

std::string opt_str(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

void metric_row(std::string& out, const RunResult& r, const std::string& model, const std::optional<Metrics>& m,
                const std::optional<double>& auc) {
  out += std::to_string(r.run) + "," + std::to_string(r.seed) + "," + model + ",";
  if (m) {
    out += format_double(m->precision) + "," + format_double(m->recall) + "," + format_double(m->f1) + "," +
           format_double(m->accuracy) + "," + opt_str(auc) + "," + std::to_string(m->counts.tp) + "," +
           std::to_string(m->counts.fp) + "," + std::to_string(m->counts.tn) + "," + std::to_string(m->counts.fn);
  } else {
    out += ",,,,,,,,";
  }
  out += ",";
  // Quote the error so commas inside it do not break the row.
  if (!r.error.empty()) {
    std::string e = r.error;
    std::replace(e.begin(), e.end(), '"', '\'');
    out += "\"" + e + "\"";
  }
  out += "\n";
}

}  // namespace

std::string format_report(const ExperimentReport& report) {
  std::string out = "run,seed,model,precision,recall,f1,accuracy,auc,tp,fp,tn,fn,error\n";
  for (const auto& r : report.runs) {
    metric_row(out, r, "ocan", r.ocan, r.auc_ocan);
    if (r.ocan_r || (!r.error.empty())) metric_row(out, r, "ocan-r", r.ocan_r, r.auc_ocan_r);
  }
  out += "\nmodel,metric,mean,std,n\n";
  for (const auto& [key, ms] : report.summary) {
    const auto dot = key.rfind('.');
    out += key.substr(0, dot) + "," + key.substr(dot + 1) + "," + format_double(ms.mean) + "," + opt_str(ms.std) +
           "," + std::to_string(ms.n) + "\n";
  }
  return out;
}

std::string format_summary(const ExperimentReport& report) {
  std::string out = "config_hash=" + report.config_hash + "\n";
  std::string seeds;
  std::size_t failed = 0;
  for (const auto& r : report.runs) {
    if (!seeds.empty()) seeds += ";";
    seeds += std::to_string(r.seed);
    failed += !r.error.empty();
  }
  out += "seeds=" + seeds + "\n";
  out += "runs=" + std::to_string(report.runs.size()) + "\n";
  out += "failed_runs=" + std::to_string(failed) + "\n";
  for (const auto& [key, ms] : report.summary) {
    out += key + ".mean=" + format_double(ms.mean) + "\n";
    if (ms.std) out += key + ".std=" + format_double(*ms.std) + "\n";
  }
  return out;
}

}  // namespace ocan
