#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>

#include "fixtures.hpp"
#include "ocan/batching.hpp"
#include "ocan/data_io.hpp"
#include "ocan/errors.hpp"
#include "ocan/fileio.hpp"

namespace ocan {
namespace {

std::string user_rows(const std::string& id, int length, int label) {
  std::string out;
  for (int t = 1; t <= length; ++t) {
    out += id + "," + std::to_string(t) + "," + std::to_string(t % 2) + ",0.5," + std::to_string(label) + "\n";
  }
  return out;
}

std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / "ocan_data_io_test";
  std::filesystem::create_directories(dir);
  return dir;
}

TEST(Sequences, LengthFilterBoundaries) {
  const std::string text = "user_id,step_index,f1,f2,label\n" + user_rows("a", 3, 0) + user_rows("b", 4, 1) +
                           user_rows("c", 50, 0) + user_rows("d", 51, 1);
  const SequenceCorpus c = parse_sequences(text, "mem");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.sequences[0].user_id, "b");
  EXPECT_EQ(c.sequences[0].length(), 4);
  EXPECT_EQ(c.sequences[1].user_id, "c");
  EXPECT_EQ(c.sequences[1].length(), 50);
  EXPECT_EQ(c.labels[0], Label::kMalicious);

  LengthFilter off;
  off.enabled = false;
  EXPECT_EQ(parse_sequences(text, "mem", off).size(), 4u);
}

TEST(Sequences, RowsMayArriveInAnyOrder) {
  const std::string text = "user_id,step_index,f1\nu,2,0.25\nv,1,1\nu,1,0.75\n";
  LengthFilter off;
  off.enabled = false;
  const SequenceCorpus c = parse_sequences(text, "mem", off);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_FALSE(c.has_labels());
  EXPECT_EQ(c.sequences[0].steps(0, 0), 0.75);
  EXPECT_EQ(c.sequences[0].steps(1, 0), 0.25);
}

TEST(Sequences, GapsAndDuplicatesNameTheUser) {
  LengthFilter off;
  off.enabled = false;
  try {
    parse_sequences("user_id,step_index,f1\nalice,1,0\nalice,3,1\n", "mem", off);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("alice"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos);
  }
  try {
    parse_sequences("user_id,step_index,f1\nbob,1,0\nbob,1,1\n", "mem", off);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bob"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
  }
}

TEST(Sequences, NonNumericCellNamesTheRow) {
  try {
    parse_sequences("user_id,step_index,f1\nu,1,0\nu,2,abc\n", "data.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("data.csv:3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_sequences("user_id,step_index,f1\nu,1,nan\n", "mem"), ParseError);
  EXPECT_THROW(parse_sequences("user_id,step_index,f1\nu,x,1\n", "mem"), ParseError);
  EXPECT_THROW(parse_sequences("user_id,step_index,f1\nu,1,1,2\n", "mem"), ParseError);
  EXPECT_THROW(parse_sequences("", "mem"), ParseError);
}

TEST(Sequences, RoundTripIsIdentity) {
  SyntheticConfig sc;
  sc.benign_users = 15;
  sc.malicious_users = 12;
  sc.seed = 3;
  const SequenceCorpus c = generate_synthetic(sc);
  const std::string path = (scratch_dir() / "seq.csv").string();
  write_sequences(path, c);
  const SequenceCorpus back = load_sequences(path);
  ASSERT_EQ(back.size(), c.size());
  EXPECT_EQ(back.labels, c.labels);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(back.sequences[i].user_id, c.sequences[i].user_id);
    EXPECT_TRUE(back.sequences[i].steps == c.sequences[i].steps);
  }
  EXPECT_EQ(format_sequences(back), read_file(path));
}

TEST(Sequences, RealValuesRoundTripExactly) {
  SequenceCorpus c;
  c.sequences.push_back(test::make_seq("r", {{0.1, 1e-300}, {-3.14159265358979, 2.0 / 3.0}}));
  LengthFilter off;
  off.enabled = false;
  const SequenceCorpus back = parse_sequences(format_sequences(c), "mem", off);
  EXPECT_TRUE(back.sequences[0].steps == c.sequences[0].steps);
}

TEST(Vectors, RoundTripIsIdentity) {
  VectorDataset d;
  d.ids = {"x", "y", "z"};
  d.features = Tensor::from_rows({{0.1, -2.5}, {1e-12, 3.0}, {7.0, 1.0 / 3.0}});
  d.labels = {Label::kBenign, Label::kMalicious, Label::kBenign};
  const std::string path = (scratch_dir() / "vec.csv").string();
  write_vectors(path, d);
  const VectorDataset back = load_vectors(path);
  EXPECT_EQ(back.ids, d.ids);
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_TRUE(back.features == d.features);
  EXPECT_THROW(parse_vectors("id,a,b\nx,1\n", "mem"), ParseError);
}

TEST(Split, SizesDisjointAndBenignOnlyTraining) {
  SyntheticConfig sc;
  sc.benign_users = 100;
  sc.malicious_users = 60;
  sc.seed = 4;
  const SequenceCorpus c = generate_synthetic(sc);
  SplitSpec spec{50, 30, 30, 9};
  const SequenceSplit s = split(c, spec);
  EXPECT_EQ(s.train.size(), 50u);
  ASSERT_EQ(s.test.size(), 60u);
  EXPECT_EQ(std::count(s.test.labels.begin(), s.test.labels.end(), Label::kMalicious), 30);
  std::set<std::string> train_ids;
  for (const auto& u : s.train) {
    train_ids.insert(u.user_id);
    EXPECT_EQ(u.user_id[0], 'b');
  }
  for (const auto& u : s.test.sequences) EXPECT_EQ(train_ids.count(u.user_id), 0u);

  const SequenceSplit again = split(c, spec);
  for (std::size_t i = 0; i < s.train.size(); ++i) EXPECT_EQ(again.train[i].user_id, s.train[i].user_id);
}

TEST(Split, ShortfallIsReported) {
  std::vector<Label> labels(10, Label::kBenign);
  labels.resize(13, Label::kMalicious);
  try {
    split_indices(labels, {8, 4, 2, 0});
    FAIL();
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("benign short by 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(split_indices(labels, {1, 1, 5, 0}), ArgumentError);
  SequenceCorpus unlabelled;
  unlabelled.sequences.push_back(test::make_seq("u", {{1}}));
  EXPECT_THROW(split(unlabelled, {1, 0, 0, 0}), ArgumentError);
}

TEST(Minibatches, SizesAndCoverage) {
  const auto batches = minibatch_indices(100, 32, 5);
  ASSERT_EQ(batches.size(), 4u);
  EXPECT_EQ(batches[0].size(), 32u);
  EXPECT_EQ(batches[1].size(), 32u);
  EXPECT_EQ(batches[2].size(), 32u);
  EXPECT_EQ(batches[3].size(), 4u);
  std::multiset<std::size_t> seen;
  for (const auto& b : batches) seen.insert(b.begin(), b.end());
  EXPECT_EQ(seen.size(), 100u);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(seen.count(i), 1u);
  EXPECT_EQ(minibatch_indices(100, 32, 5), batches);
  EXPECT_NE(minibatch_indices(100, 32, 6), batches);
  EXPECT_THROW(minibatch_indices(10, 0, 1), ArgumentError);

  const std::vector<int> items = {5, 6, 7, 8, 9};
  const auto mb = minibatches<int>(items, 2, 1);
  ASSERT_EQ(mb.size(), 3u);
  EXPECT_EQ(mb[2].size(), 1u);
}

TEST(Synthetic, ZeroOverlapIsSeparableByNearestCentroid) {
  SyntheticConfig sc;
  sc.benign_users = 100;
  sc.malicious_users = 100;
  sc.overlap = 0.0;
  sc.seed = 6;
  const SequenceCorpus c = generate_synthetic(sc);
  const Index d = 4;
  auto mean_row = [&](const ActivitySequence& s) {
    Matrix m = s.steps.matrix().colwise().mean();
    return m;
  };
  Matrix centroid[2] = {Matrix::Zero(1, d), Matrix::Zero(1, d)};
  int count[2] = {0, 0};
  for (std::size_t i = 0; i < c.size(); ++i) {
    const int k = static_cast<int>(c.labels[i]);
    centroid[k] += mean_row(c.sequences[i]);
    ++count[k];
  }
  for (int k = 0; k < 2; ++k) centroid[k] /= count[k];
  int correct = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Matrix m = mean_row(c.sequences[i]);
    const int guess = (m - centroid[0]).squaredNorm() <= (m - centroid[1]).squaredNorm() ? 0 : 1;
    correct += guess == static_cast<int>(c.labels[i]);
  }
  EXPECT_GE(correct, 198);
}

TEST(Synthetic, DeterministicBinaryAndWithinLengthRange) {
  SyntheticConfig sc;
  sc.benign_users = 30;
  sc.malicious_users = 20;
  sc.min_length = 6;
  sc.max_length = 9;
  sc.overlap = 0.3;
  sc.seed = 7;
  const SequenceCorpus a = generate_synthetic(sc);
  EXPECT_EQ(format_sequences(a), format_sequences(generate_synthetic(sc)));
  ASSERT_EQ(a.size(), 50u);
  for (const auto& s : a.sequences) {
    EXPECT_GE(s.length(), 6);
    EXPECT_LE(s.length(), 9);
    for (double v : s.steps.data()) EXPECT_TRUE(v == 0.0 || v == 1.0);
  }
  sc.seed = 8;
  EXPECT_NE(format_sequences(a), format_sequences(generate_synthetic(sc)));
}

TEST(Synthetic, InvalidConfigsThrow) {
  SyntheticConfig sc;
  sc.benign_p = {0.2, 1.5, 0.1, 0.1};
  EXPECT_THROW(generate_synthetic(sc), ArgumentError);
  sc = SyntheticConfig{};
  sc.malicious_p = {0.5};
  EXPECT_THROW(generate_synthetic(sc), ArgumentError);
  sc = SyntheticConfig{};
  sc.overlap = 1.2;
  EXPECT_THROW(generate_synthetic(sc), ArgumentError);
  sc = SyntheticConfig{};
  sc.min_length = 10;
  sc.max_length = 5;
  EXPECT_THROW(generate_synthetic(sc), ArgumentError);
  sc = SyntheticConfig{};
  sc.benign_persistence = -0.1;
  EXPECT_THROW(generate_synthetic(sc), ArgumentError);
}

TEST(FileIo, AtomicWriteAndShortestDoubles) {
  const std::string path = (scratch_dir() / "atomic.txt").string();
  write_file_atomic(path, "hello");
  EXPECT_EQ(read_file(path), "hello");
  EXPECT_THROW(read_file((scratch_dir() / "nope.txt").string()), IoError);
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678}) {
    double back = 0.0;
    ASSERT_TRUE(parse_double(format_double(v), back));
    EXPECT_EQ(back, v);
  }
  double out = 0.0;
  EXPECT_FALSE(parse_double("1.5x", out));
  EXPECT_FALSE(parse_double("inf", out));
}

}  // namespace
}  // namespace ocan
