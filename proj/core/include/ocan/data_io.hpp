#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ocan/sequence.hpp"

namespace ocan {

// Sequences plus optional per-user labels (empty when the file has none).
struct SequenceCorpus {
  std::vector<ActivitySequence> sequences;
  std::vector<Label> labels;

  bool has_labels() const { return !labels.empty(); }
  std::size_t size() const { return sequences.size(); }
};

struct LengthFilter {
  bool enabled = true;
  Index min_length = 4;
  Index max_length = 50;

  bool keep(Index length) const { return !enabled || (length >= min_length && length <= max_length); }
};

// CSV with header user_id,step_index,<features...>[,label]; one row per step,
// step_index contiguous from 1 within each user. Users keep first-seen order.
SequenceCorpus load_sequences(const std::string& path, const LengthFilter& filter = {});
SequenceCorpus parse_sequences(const std::string& text, const std::string& source,
                               const LengthFilter& filter = {});
std::string format_sequences(const SequenceCorpus& corpus);
void write_sequences(const std::string& path, const SequenceCorpus& corpus);

// CSV with header id,<features...>[,label]; one row per instance.
struct VectorDataset {
  std::vector<std::string> ids;
  Tensor features;  // N×d
  std::vector<Label> labels;

  bool has_labels() const { return !labels.empty(); }
  std::size_t size() const { return ids.size(); }
};

VectorDataset load_vectors(const std::string& path);
VectorDataset parse_vectors(const std::string& text, const std::string& source);
std::string format_vectors(const VectorDataset& data);
void write_vectors(const std::string& path, const VectorDataset& data);

// Public credit-card transactions file: Time,V1..V28,Amount,Class. Features
// are V1..V28; ids are 1-based row numbers.
VectorDataset load_creditcard(const std::string& path);

struct SplitSpec {
  std::size_t train_benign = 0;
  std::size_t test_benign = 0;
  std::size_t test_malicious = 0;
  std::uint64_t seed = 0;
};

// Index sets into the labelled collection; the training part is benign only.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

SplitIndices split_indices(std::span<const Label> labels, const SplitSpec& spec);

struct SequenceSplit {
  std::vector<ActivitySequence> train;
  SequenceCorpus test;
};
SequenceSplit split(const SequenceCorpus& corpus, const SplitSpec& spec);

struct VectorSplit {
  VectorDataset train;
  VectorDataset test;
};
VectorSplit split(const VectorDataset& data, const SplitSpec& spec);
VectorDataset select_rows(const VectorDataset& data, std::span<const std::size_t> rows);

// Two Markov feature processes. At step t each feature keeps its previous
// value with the class persistence, otherwise it is redrawn as Bernoulli with
// probability p_j + drift_j·t/(T−1), clipped to [0,1]; step 1 is always
// drawn. Malicious users use (1−overlap)·malicious + overlap·benign for every
// class parameter.
struct SyntheticConfig {
  std::size_t benign_users = 1000;
  std::size_t malicious_users = 1000;
  Index min_length = 4;
  Index max_length = 50;
  std::vector<double> benign_p = {0.1, 0.15, 0.85, 0.05};
  std::vector<double> malicious_p = {0.85, 0.9, 0.15, 0.8};
  std::vector<double> benign_drift;     // empty means zero
  std::vector<double> malicious_drift;  // empty means zero
  double benign_persistence = 0.9;
  double malicious_persistence = 0.7;
  double overlap = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Benign users first, ids "b<k>" and "m<k>".
SequenceCorpus generate_synthetic(const SyntheticConfig& config);

}  // namespace ocan
