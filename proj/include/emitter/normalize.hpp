// SPDX-License-Identifier: Apache-2.0
//
// Input normalization for the sequence classifiers.
//
// The proposed input runs two transforms in parallel and concatenates them
// along the feature axis:
//
//   dataset min-max:  2 * (v - MIN_j) / (MAX_j - MIN_j) - 1   (training-set domain)
//   per-sequence:     2 * (v - min_t) / (max_t - min_t) - 1   (this sequence only)
//
// giving a T x 2M matrix with columns [minmax(0..M-1), perseq(0..M-1)].
// Baseline schemes (raw, standardization, discretization) live here as well.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>

#include "emitter/common.hpp"
#include "emitter/config.hpp"
#include "emitter/data_model.hpp"
#include "emitter/matrix.hpp"

namespace emitter {

enum class NormScheme { none, minmax, minmax_perseq, standardize, discretize };

inline std::string to_string(NormScheme s) {
  switch (s) {
    case NormScheme::none: return "none";
    case NormScheme::minmax: return "minmax";
    case NormScheme::minmax_perseq: return "minmax+perseq";
    case NormScheme::standardize: return "standardize";
    case NormScheme::discretize: return "discretize";
  }
  return "?";
}

inline NormScheme parse_norm_scheme(const std::string& token) {
  for (auto s : {NormScheme::none, NormScheme::minmax, NormScheme::minmax_perseq, NormScheme::standardize,
                 NormScheme::discretize}) {
    if (token == to_string(s)) return s;
  }
  throw ConfigError("unknown normalization scheme '" + token + "'");
}

inline constexpr std::size_t kDefaultBins = 256;

struct NormSpec {
  NormScheme scheme = NormScheme::minmax_perseq;
  std::size_t bins = kDefaultBins;  // discretize only

  std::size_t channels() const { return scheme == NormScheme::minmax_perseq ? 2 * kNumAttributes : kNumAttributes; }
};

// Training-set statistics consumed by the dataset-level transforms.
struct DomainStats {
  std::array<AttributeDomain, kNumAttributes> domain{};
  std::array<double, kNumAttributes> mean{};
  std::array<double, kNumAttributes> stddev{};

  void validate() const {
    for (std::size_t j = 0; j < kNumAttributes; ++j) {
      if (!(std::isfinite(domain[j].min) && std::isfinite(domain[j].max) && domain[j].min < domain[j].max)) {
        throw ConfigError(std::string("attribute ") + kAttributeNames[j] + " has an empty or constant domain");
      }
      if (!(std::isfinite(mean[j]) && std::isfinite(stddev[j]) && stddev[j] > 0.0)) {
        throw ConfigError(std::string("attribute ") + kAttributeNames[j] + " has invalid standardization stats");
      }
    }
  }

  // `stats.<attr>.{min,max,mean,stddev} = value` lines.
  std::string to_text() const {
    std::ostringstream out;
    for (std::size_t j = 0; j < kNumAttributes; ++j) {
      const std::string p = std::string("stats.") + kAttributeNames[j] + ".";
      out << p << "min = " << format_double(domain[j].min) << '\n';
      out << p << "max = " << format_double(domain[j].max) << '\n';
      out << p << "mean = " << format_double(mean[j]) << '\n';
      out << p << "stddev = " << format_double(stddev[j]) << '\n';
    }
    return out.str();
  }

  static DomainStats from_config(const KeyValueConfig& kv) {
    DomainStats s;
    for (std::size_t j = 0; j < kNumAttributes; ++j) {
      const std::string p = std::string("stats.") + kAttributeNames[j] + ".";
      auto req = [&](const std::string& k) {
        double v = 0.0;
        const auto text = kv.require_string(p + k);
        if (!parse_double(text, v)) throw FormatError("bad value for " + p + k);
        return v;
      };
      s.domain[j] = {req("min"), req("max")};
      s.mean[j] = req("mean");
      s.stddev[j] = req("stddev");
    }
    s.validate();
    return s;
  }

  friend bool operator==(const DomainStats&, const DomainStats&) = default;
};

// Exact extrema plus population mean / standard deviation over every pulse of
// the training set. Never call this on test data.
inline DomainStats fit_domain_stats(const Dataset& train) {
  if (train.empty()) throw ConfigError("cannot fit normalization statistics on an empty dataset");
  DomainStats s;
  s.domain = train.attribute_domains();
  std::array<double, kNumAttributes> sum{}, sumsq{};
  std::size_t n = 0;
  for (const auto& seq : train.sequences()) {
    for (const auto& p : seq.pulses) {
      for (std::size_t j = 0; j < kNumAttributes; ++j) sum[j] += p[j];
      ++n;
    }
  }
  for (std::size_t j = 0; j < kNumAttributes; ++j) s.mean[j] = sum[j] / static_cast<double>(n);
  for (const auto& seq : train.sequences()) {
    for (const auto& p : seq.pulses) {
      for (std::size_t j = 0; j < kNumAttributes; ++j) {
        const double d = p[j] - s.mean[j];
        sumsq[j] += d * d;
      }
    }
  }
  for (std::size_t j = 0; j < kNumAttributes; ++j) s.stddev[j] = std::sqrt(sumsq[j] / static_cast<double>(n));
  s.validate();
  return s;
}

// T x M. Values outside the training domain map linearly past [-1, 1].
inline Matrix minmax_normalize(const PulseSequence& seq, const DomainStats& stats) {
  Matrix out(seq.length(), kNumAttributes);
  for (std::size_t j = 0; j < kNumAttributes; ++j) {
    const double lo = stats.domain[j].min;
    const double range = stats.domain[j].max - lo;
    for (std::size_t t = 0; t < seq.length(); ++t) {
      out(t, j) = 2.0 * (seq.pulses[t][j] - lo) / range - 1.0;
    }
  }
  return out;
}

// T x M. An attribute that is constant within the sequence maps to zeros.
inline Matrix per_sequence_normalize(const PulseSequence& seq) {
  Matrix out(seq.length(), kNumAttributes);
  for (std::size_t j = 0; j < kNumAttributes; ++j) {
    double lo = seq.pulses.front()[j];
    double hi = lo;
    for (const auto& p : seq.pulses) {
      lo = std::min(lo, p[j]);
      hi = std::max(hi, p[j]);
    }
    const double range = hi - lo;
    for (std::size_t t = 0; t < seq.length(); ++t) {
      out(t, j) = range > 0.0 ? 2.0 * (seq.pulses[t][j] - lo) / range - 1.0 : 0.0;
    }
  }
  return out;
}

inline Matrix standardize(const PulseSequence& seq, const DomainStats& stats) {
  Matrix out(seq.length(), kNumAttributes);
  for (std::size_t j = 0; j < kNumAttributes; ++j) {
    for (std::size_t t = 0; t < seq.length(); ++t) {
      out(t, j) = (seq.pulses[t][j] - stats.mean[j]) / stats.stddev[j];
    }
  }
  return out;
}

// Bin index floor(B * (v - MIN_j) / (MAX_j - MIN_j)) clamped to [0, B-1],
// stored as doubles holding exact integers.
inline Matrix discretize(const PulseSequence& seq, const DomainStats& stats, std::size_t bins) {
  Matrix out(seq.length(), kNumAttributes);
  const double b = static_cast<double>(bins);
  for (std::size_t j = 0; j < kNumAttributes; ++j) {
    const double lo = stats.domain[j].min;
    const double range = stats.domain[j].max - lo;
    for (std::size_t t = 0; t < seq.length(); ++t) {
      const double bin = std::floor(b * (seq.pulses[t][j] - lo) / range);
      out(t, j) = std::clamp(bin, 0.0, b - 1.0);
    }
  }
  return out;
}

struct NormalizedSequence {
  Matrix channels;  // valid_length x channel count
  std::size_t label = 0;
  std::size_t valid_length = 0;
};

inline NormalizedSequence normalize_scheme(const PulseSequence& seq, const DomainStats& stats, const NormSpec& spec) {
  if (seq.pulses.empty()) throw ConfigError("cannot normalize an empty sequence");
  NormalizedSequence out;
  out.label = seq.label;
  out.valid_length = seq.length();
  switch (spec.scheme) {
    case NormScheme::none:
      out.channels.resize(seq.length(), kNumAttributes);
      for (std::size_t t = 0; t < seq.length(); ++t) {
        for (std::size_t j = 0; j < kNumAttributes; ++j) out.channels(t, j) = seq.pulses[t][j];
      }
      break;
    case NormScheme::minmax: out.channels = minmax_normalize(seq, stats); break;
    case NormScheme::minmax_perseq:
      out.channels.resize(seq.length(), 2 * kNumAttributes);
      out.channels.leftCols(kNumAttributes) = minmax_normalize(seq, stats);
      out.channels.rightCols(kNumAttributes) = per_sequence_normalize(seq);
      break;
    case NormScheme::standardize: out.channels = standardize(seq, stats); break;
    case NormScheme::discretize:
      if (spec.bins < 1) throw ConfigError("discretization needs at least one bin");
      out.channels = discretize(seq, stats, spec.bins);
      break;
  }
  return out;
}

inline std::vector<NormalizedSequence> normalize_dataset(const Dataset& ds, const DomainStats& stats,
                                                         const NormSpec& spec) {
  std::vector<NormalizedSequence> out;
  out.reserve(ds.size());
  for (const auto& s : ds.sequences()) out.push_back(normalize_scheme(s, stats, spec));
  return out;
}

}  // namespace emitter
