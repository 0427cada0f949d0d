#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ocan/autoencoder.hpp"
#include "ocan/data_io.hpp"
#include "ocan/detector.hpp"
#include "ocan/gan.hpp"

namespace ocan {

// Malicious is the positive class throughout.
struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  ConfusionCounts counts;
  // Set when a ratio had a zero denominator and was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
};

Metrics confusion_metrics(std::span<const Label> predicted, std::span<const Label> truth);
Metrics metrics_from_counts(const ConfusionCounts& c);

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr), from (0,0) to (1,1)
  double auc = 0.0;
};

// `scores` rank maliciousness: larger means more likely malicious.
RocCurve roc_auc(std::span<const double> scores, std::span<const Label> labels);

// Nearest-neighbour one-class rule: with u the nearest training point to z,
// d1 = |z - u| and d2 = distance from u to its own nearest training
// neighbour; z is malicious iff d1 - d2 > threshold.
std::vector<Label> ocnn_baseline(const Tensor& train, const Tensor& test, double threshold);

struct ClusterReport {
  std::vector<int> assignment;  // cluster id, or -1 for noise
  int clusters = 0;
  std::size_t noise = 0;
  // Per cluster: {benign, malicious} counts (empty without labels).
  std::vector<std::pair<std::size_t, std::size_t>> composition;
  std::pair<std::size_t, std::size_t> noise_composition{0, 0};
  Tensor centroid_distances;  // clusters×clusters
};

ClusterReport dbscan_cluster(const Tensor& points, double eps, std::size_t min_pts,
                             std::span<const Label> labels = {});
double mean_pairwise_distance(const Tensor& points);
// 180 neighbours per 9000 points, at least 1.
std::size_t scaled_min_pts(std::size_t n);

// Per-epoch mean p_benign on three probe sets.
struct ProbeRow {
  int epoch = 0;
  double benign = 0.0;
  double generated = 0.0;
  double malicious = 0.0;
};

class TrainingProbe {
 public:
  TrainingProbe(Tensor benign, Tensor malicious, std::size_t generated, std::uint64_t seed);
  void record(int epoch, const Generator& g, const Discriminator& d);
  GanEpochCallback callback();
  const std::vector<ProbeRow>& rows() const { return rows_; }

 private:
  Tensor benign_, malicious_;
  Tensor noise_;  // sampled on first use, once the noise width is known
  std::uint64_t seed_ = 0;
  std::vector<ProbeRow> rows_;
};

// Header epoch,series,mean_p_benign; three rows per epoch.
std::string format_probe_curves(std::span<const ProbeRow> rows);

enum class DataKind { kSequences, kVectors };

struct ExperimentProtocol {
  DataKind data = DataKind::kSequences;
  SequenceCorpus sequences;
  VectorDataset vectors;
  EncoderKind encoder = EncoderKind::kLstm;
  SplitSpec split;  // the seed is replaced per run
  AutoencoderConfig autoencoder;
  GanConfig gan;
  std::size_t runs = 10;
  std::uint64_t seed_base = 0;
  bool run_ocan_r = true;
  bool probes = false;
  double threshold = 0.5;
  std::size_t workers = 1;  // seeds run concurrently when > 1
};

struct RunResult {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::string error;  // "<stage>: <message>" when the run failed
  std::optional<Metrics> ocan;
  std::optional<Metrics> ocan_r;
  std::optional<double> auc_ocan;
  std::optional<double> auc_ocan_r;
  std::vector<ProbeRow> probes;
  double seconds = 0.0;
};

struct MeanStd {
  double mean = 0.0;
  std::optional<double> std;  // absent with fewer than two runs
  std::size_t n = 0;
};

struct ExperimentReport {
  std::vector<RunResult> runs;
  std::map<std::string, MeanStd> summary;  // e.g. "ocan.f1"
  std::string config;                      // canonical JSON of the protocol
  std::string config_hash;
};

MeanStd mean_std(std::span<const double> values);
std::string protocol_json(const ExperimentProtocol& p);
std::string config_hash(const std::string& canonical);

using RunCallback = std::function<void(const RunResult&)>;
ExperimentReport run_experiment(const ExperimentProtocol& protocol, const RunCallback& on_run = {});

// Per-run rows plus mean/std rows, comma separated with a header.
std::string format_report(const ExperimentReport& report);
// key=value lines, one per summary metric, plus config_hash and seeds.
std::string format_summary(const ExperimentReport& report);

}  // namespace ocan
