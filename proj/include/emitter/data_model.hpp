// SPDX-License-Identifier: Apache-2.0
//
// Pulse sequences, labelled datasets and the line-oriented dataset file format.
//
// Attribute values are unit-agnostic reals. Files (and every preset shipped
// with the project) use microseconds for PRI/PW and megahertz for RF.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "emitter/common.hpp"

namespace emitter {

inline constexpr std::size_t kNumAttributes = 3;
inline constexpr std::size_t kMinSequenceLength = 7;
inline constexpr std::size_t kMaxSequenceLength = 512;

enum class Attribute : std::size_t { pri = 0, pw = 1, rf = 2 };

inline constexpr std::array<const char*, kNumAttributes> kAttributeNames{"pri", "pw", "rf"};

struct Pulse {
  double pri = 0.0;
  double pw = 0.0;
  double rf = 0.0;

  double operator[](std::size_t j) const { return j == 0 ? pri : (j == 1 ? pw : rf); }
  double& operator[](std::size_t j) { return j == 0 ? pri : (j == 1 ? pw : rf); }

  bool is_valid() const {
    return std::isfinite(pri) && std::isfinite(pw) && std::isfinite(rf) && pri > 0.0 && pw > 0.0 &&
           rf > 0.0 && pw < pri;
  }

  friend bool operator==(const Pulse&, const Pulse&) = default;
};

// Values of one attribute along a sequence.
struct AttributeSequence {
  std::vector<double> values;
  std::size_t attribute_id = 0;
};

struct PulseSequence {
  std::vector<Pulse> pulses;  // emission-time order
  std::size_t label = 0;

  std::size_t length() const { return pulses.size(); }

  AttributeSequence attribute(std::size_t j) const {
    AttributeSequence out{{}, j};
    out.values.reserve(pulses.size());
    for (const auto& p : pulses) out.values.push_back(p[j]);
    return out;
  }

  friend bool operator==(const PulseSequence&, const PulseSequence&) = default;
};

struct AttributeDomain {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  friend bool operator==(const AttributeDomain&, const AttributeDomain&) = default;
};

// Immutable labelled collection. Domains and class counts are always derived
// from the contained sequences.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<PulseSequence> sequences, std::size_t num_classes)
      : sequences_(std::move(sequences)), num_classes_(num_classes), class_counts_(num_classes, 0) {
    for (std::size_t i = 0; i < sequences_.size(); ++i) {
      const auto& s = sequences_[i];
      if (s.label >= num_classes_) {
        throw ConfigError("sequence " + std::to_string(i) + " has label " + std::to_string(s.label) +
                          " but the dataset declares " + std::to_string(num_classes_) + " classes");
      }
      ++class_counts_[s.label];
      for (const auto& p : s.pulses) {
        for (std::size_t j = 0; j < kNumAttributes; ++j) {
          domains_[j].min = std::min(domains_[j].min, p[j]);
          domains_[j].max = std::max(domains_[j].max, p[j]);
        }
      }
    }
  }

  const std::vector<PulseSequence>& sequences() const { return sequences_; }
  const PulseSequence& operator[](std::size_t i) const { return sequences_[i]; }
  std::size_t size() const { return sequences_.size(); }
  bool empty() const { return sequences_.empty(); }
  std::size_t num_classes() const { return num_classes_; }

  // Exact per-attribute extrema over every pulse. Infinite sentinels when empty.
  const std::array<AttributeDomain, kNumAttributes>& attribute_domains() const { return domains_; }
  const std::vector<std::size_t>& class_counts() const { return class_counts_; }

  std::vector<std::size_t> labels() const {
    std::vector<std::size_t> out;
    out.reserve(sequences_.size());
    for (const auto& s : sequences_) out.push_back(s.label);
    return out;
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.num_classes_ == b.num_classes_ && a.sequences_ == b.sequences_;
  }

 private:
  std::vector<PulseSequence> sequences_;
  std::size_t num_classes_ = 0;
  std::array<AttributeDomain, kNumAttributes> domains_{};
  std::vector<std::size_t> class_counts_;
};

using WarningSink = std::function<void(const std::string&)>;

inline void warn_to_stderr(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

inline constexpr const char* kDatasetMagic = "# emitter-dataset v1";

inline void write_dataset(const Dataset& ds, std::ostream& out) {
  out << kDatasetMagic << '\n';
  out << "classes " << ds.num_classes() << '\n';
  for (const auto& s : ds.sequences()) {
    out << "seq " << s.label << ' ' << s.length() << '\n';
    for (const auto& p : s.pulses) {
      out << format_double(p.pri) << ' ' << format_double(p.pw) << ' ' << format_double(p.rf) << '\n';
    }
  }
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot open '" + path + "' for writing");
  write_dataset(ds, out);
  out.flush();
  if (!out) throw RuntimeFailure("write failed for '" + path + "'");
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

// Parses the dataset format. Records are numbered from 1 in error messages.
inline Dataset read_dataset(std::istream& in, const WarningSink& warn = warn_to_stderr) {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> FormatError {
    return FormatError("line " + std::to_string(line_no) + ": " + msg);
  };
  auto next_content_line = [&](std::vector<std::string_view>& tokens) {
    while (std::getline(in, line)) {
      ++line_no;
      tokens = detail::split_ws(line);
      if (!tokens.empty() && tokens[0].front() != '#') return true;
    }
    return false;
  };

  if (!std::getline(in, line)) throw FormatError("empty dataset file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kDatasetMagic) throw fail("missing '" + std::string(kDatasetMagic) + "' header");

  std::vector<std::string_view> tok;
  std::size_t num_classes = 0;
  if (!next_content_line(tok) || tok.size() != 2 || tok[0] != "classes" || !parse_int(tok[1], num_classes) ||
      num_classes == 0) {
    throw fail("expected 'classes <C>' with C >= 1");
  }

  std::vector<PulseSequence> seqs;
  while (next_content_line(tok)) {
    const std::size_t record = seqs.size() + 1;
    auto rfail = [&](const std::string& msg) {
      return fail("record " + std::to_string(record) + ": " + msg);
    };
    PulseSequence s;
    std::size_t length = 0;
    if (tok.size() != 3 || tok[0] != "seq" || !parse_int(tok[1], s.label) || !parse_int(tok[2], length)) {
      throw rfail("expected 'seq <label> <T>'");
    }
    if (s.label >= num_classes) {
      throw rfail("label " + std::to_string(s.label) + " >= declared classes " + std::to_string(num_classes));
    }
    if (length < 1 || length > kMaxSequenceLength) {
      throw rfail("length " + std::to_string(length) + " outside [1, " + std::to_string(kMaxSequenceLength) + "]");
    }
    if (length < kMinSequenceLength) {
      warn("record " + std::to_string(record) + " has only " + std::to_string(length) + " pulses");
    }
    s.pulses.resize(length);
    for (std::size_t t = 0; t < length; ++t) {
      if (!next_content_line(tok)) throw rfail("truncated after " + std::to_string(t) + " pulses");
      if (tok.size() != kNumAttributes) throw rfail("pulse " + std::to_string(t + 1) + ": expected 3 values");
      for (std::size_t j = 0; j < kNumAttributes; ++j) {
        double v = 0.0;
        if (!parse_double(tok[j], v) || !std::isfinite(v) || v <= 0.0) {
          throw rfail("pulse " + std::to_string(t + 1) + ", field " + kAttributeNames[j] + ": '" +
                      std::string(tok[j]) + "' is not a finite positive number");
        }
        s.pulses[t][j] = v;
      }
    }
    seqs.push_back(std::move(s));
  }
  return Dataset(std::move(seqs), num_classes);
}

inline Dataset load_dataset(const std::string& path, const WarningSink& warn = warn_to_stderr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot open dataset '" + path + "'");
  try {
    return read_dataset(in, warn);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// Number of training sequences a class of size n contributes: n*fraction
// rounded half away from zero, then kept in [1, n-1].
inline std::size_t stratified_train_count(std::size_t n, double train_fraction) {
  auto k = static_cast<long long>(std::llround(static_cast<double>(n) * train_fraction));
  k = std::clamp<long long>(k, 1, static_cast<long long>(n) - 1);
  return static_cast<std::size_t>(k);
}

// Stratified, seeded split. Both halves keep the original relative order.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds[i].label].push_back(i);

  std::vector<char> to_train(ds.size(), 0);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    if (idx.size() < 2) {
      throw ConfigError("class " + std::to_string(c) + " has fewer than 2 sequences; cannot split");
    }
    auto rng = make_rng(seed, "split", c);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto k = stratified_train_count(idx.size(), train_fraction);
    for (std::size_t i = 0; i < k; ++i) to_train[idx[i]] = 1;
  }

  std::vector<PulseSequence> train, test;
  for (std::size_t i = 0; i < ds.size(); ++i) (to_train[i] ? train : test).push_back(ds[i]);
  return {Dataset(std::move(train), ds.num_classes()), Dataset(std::move(test), ds.num_classes())};
}

}  // namespace emitter
