#include "ocan/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "ocan/errors.hpp"
#include "ocan/fileio.hpp"
#include "ocan/rng.hpp"

namespace ocan {

namespace {

// Splits text into lines, dropping a trailing '\r' and blank lines. Keeps the
// 1-based line number of each kept line.
struct Line {
  std::size_t number;
  std::string_view text;
};

std::vector<Line> lines_of(const std::string& text) {
  std::vector<Line> out;
  std::size_t start = 0, number = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++number;
    std::string_view line(text.data() + start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) out.push_back({number, line});
    start = end + 1;
  }
  return out;
}

[[noreturn]] void fail_row(const std::string& source, std::size_t line, const std::string& what) {
  throw ParseError(source + ":" + std::to_string(line) + ": " + what);
}

Label parse_label(std::string_view cell, const std::string& source, std::size_t line) {
  if (cell == "0") return Label::kBenign;
  if (cell == "1") return Label::kMalicious;
  fail_row(source, line, "label must be 0 or 1, got '" + std::string(cell) + "'");
}

bool has_label_column(const std::vector<std::string_view>& header) {
  return !header.empty() && header.back() == "label";
}

void check_id(const std::string& id, const char* what) {
  if (id.empty() || id.find_first_of(",\"\n\r") != std::string::npos) {
    throw ArgumentError(std::string(what) + " '" + id + "' is empty or contains a delimiter");
  }
}

char label_char(Label l) { return l == Label::kBenign ? '0' : '1'; }

}  // namespace

// ---------------------------------------------------------------------------
// Sequences

SequenceCorpus parse_sequences(const std::string& text, const std::string& source,
                               const LengthFilter& filter) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError(source + ": empty file (no header)");
  const auto header = split_csv(lines[0].text);
  const bool labelled = has_label_column(header);
  const std::size_t width_cols = header.size();
  if (width_cols < 3 + (labelled ? 1u : 0u)) {
    throw ParseError(source + ": header needs user_id, step_index and at least one feature column");
  }
  const Index d = static_cast<Index>(width_cols - 2 - (labelled ? 1 : 0));

  struct Pending {
    std::string id;
    std::vector<std::pair<long, std::size_t>> steps;  // (step_index, value offset)
    std::vector<double> values;
    Label label = Label::kBenign;
    std::size_t first_line = 0;
  };
  std::vector<Pending> users;
  std::unordered_map<std::string, std::size_t> index;

  for (std::size_t k = 1; k < lines.size(); ++k) {
    const std::size_t ln = lines[k].number;
    const auto cells = split_csv(lines[k].text);
    if (cells.size() != width_cols) {
      fail_row(source, ln, "expected " + std::to_string(width_cols) + " cells, got " +
                               std::to_string(cells.size()));
    }
    const std::string id(cells[0]);
    if (id.empty()) fail_row(source, ln, "empty user_id");
    long step = 0;
    auto [end, ec] = std::from_chars(cells[1].data(), cells[1].data() + cells[1].size(), step);
    if (ec != std::errc() || end != cells[1].data() + cells[1].size()) {
      fail_row(source, ln, "step_index '" + std::string(cells[1]) + "' is not an integer");
    }
    auto [it, inserted] = index.try_emplace(id, users.size());
    if (inserted) {
      users.push_back({id, {}, {}, Label::kBenign, ln});
      if (labelled) users.back().label = parse_label(cells.back(), source, ln);
    } else if (labelled && parse_label(cells.back(), source, ln) != users[it->second].label) {
      fail_row(source, ln, "user '" + id + "' has conflicting labels");
    }
    Pending& u = users[it->second];
    u.steps.emplace_back(step, u.values.size());
    for (Index j = 0; j < d; ++j) {
      double v = 0.0;
      const auto cell = cells[static_cast<std::size_t>(2 + j)];
      if (!parse_double(cell, v)) {
        fail_row(source, ln, "column " + std::to_string(3 + j) + ": '" + std::string(cell) +
                                 "' is not a finite number");
      }
      u.values.push_back(v);
    }
  }

  SequenceCorpus corpus;
  for (Pending& u : users) {
    std::sort(u.steps.begin(), u.steps.end());
    for (std::size_t t = 0; t < u.steps.size(); ++t) {
      const long expected = static_cast<long>(t) + 1;
      if (u.steps[t].first != expected) {
        const bool dup = t > 0 && u.steps[t].first == u.steps[t - 1].first;
        throw ParseError(source + ": user '" + u.id + "' has " + (dup ? "duplicate" : "missing") +
                         " step_index " + std::to_string(dup ? u.steps[t].first : expected));
      }
    }
    const Index len = static_cast<Index>(u.steps.size());
    if (!filter.keep(len)) continue;
    Tensor steps(len, d);
    for (Index t = 0; t < len; ++t) {
      const std::size_t off = u.steps[static_cast<std::size_t>(t)].second;
      for (Index j = 0; j < d; ++j) steps(t, j) = u.values[off + static_cast<std::size_t>(j)];
    }
    corpus.sequences.push_back({u.id, std::move(steps)});
    if (labelled) corpus.labels.push_back(u.label);
  }
  return corpus;
}

SequenceCorpus load_sequences(const std::string& path, const LengthFilter& filter) {
  return parse_sequences(read_file(path), path, filter);
}

std::string format_sequences(const SequenceCorpus& corpus) {
  if (corpus.sequences.empty()) throw ArgumentError("cannot write an empty sequence corpus");
  if (corpus.has_labels() && corpus.labels.size() != corpus.sequences.size()) {
    throw ArgumentError("label count does not match sequence count");
  }
  const Index d = corpus.sequences.front().width();
  std::string out = "user_id,step_index";
  for (Index j = 0; j < d; ++j) out += ",x" + std::to_string(j + 1);
  if (corpus.has_labels()) out += ",label";
  out += '\n';
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
    const ActivitySequence& s = corpus.sequences[i];
    check_id(s.user_id, "user_id");
    if (!seen.insert(s.user_id).second) throw ArgumentError("duplicate user_id '" + s.user_id + "'");
    if (s.width() != d) {
      throw ShapeError("user '" + s.user_id + "' has width " + std::to_string(s.width()) +
                       ", corpus width is " + std::to_string(d));
    }
    for (Index t = 0; t < s.length(); ++t) {
      out += s.user_id;
      out += ',';
      out += std::to_string(t + 1);
      for (Index j = 0; j < d; ++j) {
        out += ',';
        out += format_double(s.steps(t, j));
      }
      if (corpus.has_labels()) {
        out += ',';
        out += label_char(corpus.labels[i]);
      }
      out += '\n';
    }
  }
  return out;
}

void write_sequences(const std::string& path, const SequenceCorpus& corpus) {
  write_file_atomic(path, format_sequences(corpus));
}

// ---------------------------------------------------------------------------
// Vectors

VectorDataset parse_vectors(const std::string& text, const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError(source + ": empty file (no header)");
  const auto header = split_csv(lines[0].text);
  const bool labelled = has_label_column(header);
  const std::size_t cols = header.size();
  if (cols < 2 + (labelled ? 1u : 0u)) {
    throw ParseError(source + ": header needs id and at least one feature column");
  }
  const Index d = static_cast<Index>(cols - 1 - (labelled ? 1 : 0));
  VectorDataset data;
  std::vector<double> values;
  std::unordered_set<std::string> seen;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const std::size_t ln = lines[k].number;
    const auto cells = split_csv(lines[k].text);
    if (cells.size() != cols) {
      fail_row(source, ln, "expected " + std::to_string(cols) + " cells, got " + std::to_string(cells.size()));
    }
    std::string id(cells[0]);
    if (id.empty()) fail_row(source, ln, "empty id");
    if (!seen.insert(id).second) fail_row(source, ln, "duplicate id '" + id + "'");
    for (Index j = 0; j < d; ++j) {
      double v = 0.0;
      const auto cell = cells[static_cast<std::size_t>(1 + j)];
      if (!parse_double(cell, v)) {
        fail_row(source, ln, "column " + std::to_string(2 + j) + ": '" + std::string(cell) +
                                 "' is not a finite number");
      }
      values.push_back(v);
    }
    if (labelled) data.labels.push_back(parse_label(cells.back(), source, ln));
    data.ids.push_back(std::move(id));
  }
  data.features = Tensor::from_vector(static_cast<Index>(data.ids.size()), d, values);
  return data;
}

VectorDataset load_vectors(const std::string& path) { return parse_vectors(read_file(path), path); }

std::string format_vectors(const VectorDataset& data) {
  if (data.ids.empty()) throw ArgumentError("cannot write an empty vector dataset");
  if (static_cast<std::size_t>(data.features.rows()) != data.ids.size()) {
    throw ShapeError("vector dataset has " + std::to_string(data.ids.size()) + " ids and " +
                     std::to_string(data.features.rows()) + " rows");
  }
  if (data.has_labels() && data.labels.size() != data.ids.size()) {
    throw ArgumentError("label count does not match row count");
  }
  const Index d = data.features.cols();
  std::string out = "id";
  for (Index j = 0; j < d; ++j) out += ",x" + std::to_string(j + 1);
  if (data.has_labels()) out += ",label";
  out += '\n';
  for (std::size_t i = 0; i < data.ids.size(); ++i) {
    check_id(data.ids[i], "id");
    out += data.ids[i];
    for (Index j = 0; j < d; ++j) {
      out += ',';
      out += format_double(data.features(static_cast<Index>(i), j));
    }
    if (data.has_labels()) {
      out += ',';
      out += label_char(data.labels[i]);
    }
    out += '\n';
  }
  return out;
}

void write_vectors(const std::string& path, const VectorDataset& data) {
  write_file_atomic(path, format_vectors(data));
}

VectorDataset load_creditcard(const std::string& path) {
  const std::string text = read_file(path);
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError(path + ": empty file (no header)");
  const auto header = split_csv(lines[0].text);
  auto column = [&](std::string_view name) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return c;
    }
    throw ParseError(path + ": missing column '" + std::string(name) + "'");
  };
  std::vector<std::size_t> feature_cols;
  for (int j = 1; j <= 28; ++j) feature_cols.push_back(column("V" + std::to_string(j)));
  const std::size_t class_col = column("Class");

  VectorDataset data;
  std::vector<double> values;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const std::size_t ln = lines[k].number;
    const auto cells = split_csv(lines[k].text);
    if (cells.size() != header.size()) {
      fail_row(path, ln, "expected " + std::to_string(header.size()) + " cells, got " +
                             std::to_string(cells.size()));
    }
    for (std::size_t c : feature_cols) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        fail_row(path, ln, "column " + std::string(header[c]) + ": '" + std::string(cells[c]) +
                               "' is not a finite number");
      }
      values.push_back(v);
    }
    data.labels.push_back(parse_label(cells[class_col], path, ln));
    data.ids.push_back(std::to_string(k));
  }
  data.features = Tensor::from_vector(static_cast<Index>(data.ids.size()), 28, values);
  return data;
}

// ---------------------------------------------------------------------------
// Splits

SplitIndices split_indices(std::span<const Label> labels, const SplitSpec& spec) {
  std::vector<std::size_t> benign, malicious;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] == Label::kBenign ? benign : malicious).push_back(i);
  }
  const std::size_t need_benign = spec.train_benign + spec.test_benign;
  if (benign.size() < need_benign || malicious.size() < spec.test_malicious) {
    std::string msg = "split needs " + std::to_string(need_benign) + " benign and " +
                      std::to_string(spec.test_malicious) + " malicious instances; have " +
                      std::to_string(benign.size()) + " and " + std::to_string(malicious.size());
    if (benign.size() < need_benign) msg += " (benign short by " + std::to_string(need_benign - benign.size()) + ")";
    if (malicious.size() < spec.test_malicious) {
      msg += " (malicious short by " + std::to_string(spec.test_malicious - malicious.size()) + ")";
    }
    throw ArgumentError(msg);
  }
  SeededRng rng(spec.seed);
  rng.shuffle(std::span<std::size_t>(benign));
  rng.shuffle(std::span<std::size_t>(malicious));
  SplitIndices out;
  out.train.assign(benign.begin(), benign.begin() + static_cast<std::ptrdiff_t>(spec.train_benign));
  out.test.assign(benign.begin() + static_cast<std::ptrdiff_t>(spec.train_benign),
                  benign.begin() + static_cast<std::ptrdiff_t>(need_benign));
  out.test.insert(out.test.end(), malicious.begin(),
                  malicious.begin() + static_cast<std::ptrdiff_t>(spec.test_malicious));
  return out;
}

SequenceSplit split(const SequenceCorpus& corpus, const SplitSpec& spec) {
  if (!corpus.has_labels()) throw ArgumentError("split requires a labelled corpus");
  const SplitIndices idx = split_indices(corpus.labels, spec);
  SequenceSplit out;
  for (std::size_t i : idx.train) out.train.push_back(corpus.sequences[i]);
  for (std::size_t i : idx.test) {
    out.test.sequences.push_back(corpus.sequences[i]);
    out.test.labels.push_back(corpus.labels[i]);
  }
  return out;
}

VectorDataset select_rows(const VectorDataset& data, std::span<const std::size_t> rows) {
  VectorDataset out;
  out.features = Tensor(static_cast<Index>(rows.size()), data.features.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t i = rows[k];
    if (i >= data.ids.size()) throw ArgumentError("select_rows: row " + std::to_string(i) + " out of range");
    out.ids.push_back(data.ids[i]);
    out.features.matrix().row(static_cast<Index>(k)) = data.features.matrix().row(static_cast<Index>(i));
    if (data.has_labels()) out.labels.push_back(data.labels[i]);
  }
  return out;
}

VectorSplit split(const VectorDataset& data, const SplitSpec& spec) {
  if (!data.has_labels()) throw ArgumentError("split requires a labelled dataset");
  const SplitIndices idx = split_indices(data.labels, spec);
  return {select_rows(data, idx.train), select_rows(data, idx.test)};
}

// ---------------------------------------------------------------------------
// Synthetic corpus

void SyntheticConfig::validate() const {
  if (benign_p.empty()) throw ArgumentError("synthetic config: empty benign probability vector");
  if (malicious_p.size() != benign_p.size()) {
    throw ArgumentError("synthetic config: benign and malicious probability vectors differ in length");
  }
  auto check = [](const std::vector<double>& v, const char* what) {
    for (double p : v) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ArgumentError(std::string("synthetic config: ") + what + " probability " +
                            std::to_string(p) + " outside [0,1]");
      }
    }
  };
  check(benign_p, "benign");
  check(malicious_p, "malicious");
  for (const auto* drift : {&benign_drift, &malicious_drift}) {
    if (!drift->empty() && drift->size() != benign_p.size()) {
      throw ArgumentError("synthetic config: drift vector length differs from feature count");
    }
    for (double x : *drift) {
      if (!std::isfinite(x)) throw ArgumentError("synthetic config: non-finite drift");
    }
  }
  for (double r : {benign_persistence, malicious_persistence}) {
    if (!(r >= 0.0 && r <= 1.0)) {
      throw ArgumentError("synthetic config: persistence " + std::to_string(r) + " outside [0,1]");
    }
  }
  if (!(overlap >= 0.0 && overlap <= 1.0)) {
    throw ArgumentError("synthetic config: overlap " + std::to_string(overlap) + " outside [0,1]");
  }
  if (min_length < 1 || max_length < min_length) {
    throw ArgumentError("synthetic config: invalid length range [" + std::to_string(min_length) + ", " +
                        std::to_string(max_length) + "]");
  }
}

SequenceCorpus generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  const std::size_t d = config.benign_p.size();
  auto drift_or_zero = [d](const std::vector<double>& v) {
    return v.empty() ? std::vector<double>(d, 0.0) : v;
  };
  const std::vector<double> b_p = config.benign_p;
  const std::vector<double> b_drift = drift_or_zero(config.benign_drift);
  std::vector<double> m_p(d), m_drift(d);
  const std::vector<double> raw_m_drift = drift_or_zero(config.malicious_drift);
  for (std::size_t j = 0; j < d; ++j) {
    m_p[j] = (1.0 - config.overlap) * config.malicious_p[j] + config.overlap * b_p[j];
    m_drift[j] = (1.0 - config.overlap) * raw_m_drift[j] + config.overlap * b_drift[j];
  }

  SequenceCorpus corpus;
  SeededRng rng(config.seed);
  const double m_keep = (1.0 - config.overlap) * config.malicious_persistence +
                        config.overlap * config.benign_persistence;
  auto emit = [&](const std::string& id, const std::vector<double>& p, const std::vector<double>& drift,
                  double keep, Label label) {
    const Index len = static_cast<Index>(rng.between(config.min_length, config.max_length));
    Tensor steps(len, static_cast<Index>(d));
    for (Index t = 0; t < len; ++t) {
      const double frac = len > 1 ? static_cast<double>(t) / static_cast<double>(len - 1) : 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double pj = std::clamp(p[j] + drift[j] * frac, 0.0, 1.0);
        const auto c = static_cast<Index>(j);
        if (t > 0 && rng.bernoulli(keep)) {
          steps(t, c) = steps(t - 1, c);
        } else {
          steps(t, c) = rng.bernoulli(pj) ? 1.0 : 0.0;
        }
      }
    }
    corpus.sequences.push_back({id, std::move(steps)});
    corpus.labels.push_back(label);
  };
  for (std::size_t i = 0; i < config.benign_users; ++i) {
    emit("b" + std::to_string(i + 1), b_p, b_drift, config.benign_persistence, Label::kBenign);
  }
  for (std::size_t i = 0; i < config.malicious_users; ++i) {
    emit("m" + std::to_string(i + 1), m_p, m_drift, m_keep, Label::kMalicious);
  }
  return corpus;
}

}  // namespace ocan
