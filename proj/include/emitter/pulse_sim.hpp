// SPDX-License-Identifier: Apache-2.0
//
// Synthetic pulse-stream generator. Each class is one emitter whose PRI, PW
// and RF follow a small pattern algebra (constant, stagger, jitter, hop).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "emitter/common.hpp"
#include "emitter/config.hpp"
#include "emitter/data_model.hpp"

namespace emitter {

inline constexpr double kPositiveFloor = 1e-9;

enum class PatternKind { constant, stagger, jitter, hop };

struct Pattern {
  PatternKind kind = PatternKind::constant;
  std::vector<double> values{1.0};  // constant: {v}; stagger/hop: cycle; jitter: {center}
  double deviation = 0.0;           // jitter only, fractional
  std::size_t dwell = 1;            // hop only, pulses per frequency

  static Pattern constant(double v) { return {PatternKind::constant, {v}, 0.0, 1}; }
  static Pattern stagger(std::vector<double> v) { return {PatternKind::stagger, std::move(v), 0.0, 1}; }
  static Pattern jitter(double center, double dev) { return {PatternKind::jitter, {center}, dev, 1}; }
  static Pattern hop(std::vector<double> v, std::size_t dwell) {
    return {PatternKind::hop, std::move(v), 0.0, dwell};
  }

  // Number of pulses after which a deterministic pattern repeats.
  std::size_t period() const {
    switch (kind) {
      case PatternKind::stagger: return values.size();
      case PatternKind::hop: return values.size() * dwell;
      default: return 1;
    }
  }

  double mean() const {
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  }

  double lower_bound() const {
    const double lo = *std::min_element(values.begin(), values.end());
    return kind == PatternKind::jitter ? lo * (1.0 - deviation) : lo;
  }

  double upper_bound() const {
    const double hi = *std::max_element(values.begin(), values.end());
    return kind == PatternKind::jitter ? hi * (1.0 + deviation) : hi;
  }

  // Noise-free value at pulse t. Jitter is uniform on center*(1 +- deviation).
  double value_at(std::size_t t, Rng& rng) const {
    switch (kind) {
      case PatternKind::constant: return values[0];
      case PatternKind::stagger: return values[t % values.size()];
      case PatternKind::hop: return values[(t / dwell) % values.size()];
      case PatternKind::jitter: {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        return values[0] * (1.0 + deviation * u(rng));
      }
    }
    return values[0];
  }

  void validate(const std::string& what) const {
    if (values.empty()) throw ConfigError(what + ": pattern has no values");
    for (double v : values) {
      if (!std::isfinite(v) || v <= 0.0) throw ConfigError(what + ": pattern values must be finite and > 0");
    }
    if ((kind == PatternKind::constant || kind == PatternKind::jitter) && values.size() != 1) {
      throw ConfigError(what + ": constant/jitter patterns take exactly one value");
    }
    if (kind == PatternKind::jitter && !(deviation >= 0.0 && deviation <= 0.5)) {
      throw ConfigError(what + ": jitter deviation must lie in [0, 0.5]");
    }
    if (kind == PatternKind::hop && dwell == 0) throw ConfigError(what + ": hop dwell must be >= 1");
  }

  std::string to_string() const {
    std::ostringstream out;
    switch (kind) {
      case PatternKind::constant: out << "constant " << format_double(values[0]); break;
      case PatternKind::jitter: out << "jitter " << format_double(values[0]) << ' ' << format_double(deviation); break;
      case PatternKind::stagger:
        out << "stagger";
        for (double v : values) out << ' ' << format_double(v);
        break;
      case PatternKind::hop:
        out << "hop " << dwell;
        for (double v : values) out << ' ' << format_double(v);
        break;
    }
    return out.str();
  }

  // "constant v" | "stagger v1 v2 ..." | "jitter center dev" | "hop dwell v1 v2 ..."
  static Pattern parse(const std::string& text) {
    auto tok = KeyValueConfig::split_list(text);
    if (tok.empty()) throw ConfigError("empty pattern");
    auto num = [&](std::size_t i) {
      double v = 0.0;
      if (i >= tok.size() || !parse_double(tok[i], v)) throw ConfigError("bad number in pattern '" + text + "'");
      return v;
    };
    auto rest = [&](std::size_t from) {
      std::vector<double> v;
      for (std::size_t i = from; i < tok.size(); ++i) v.push_back(num(i));
      return v;
    };
    if (tok[0] == "constant" && tok.size() == 2) return constant(num(1));
    if (tok[0] == "stagger" && tok.size() >= 2) return stagger(rest(1));
    if (tok[0] == "jitter" && tok.size() == 3) return jitter(num(1), num(2));
    if (tok[0] == "hop" && tok.size() >= 3) {
      std::size_t dwell = 0;
      if (!parse_int(tok[1], dwell)) throw ConfigError("bad hop dwell in pattern '" + text + "'");
      return hop(rest(2), dwell);
    }
    throw ConfigError("unrecognized pattern '" + text + "'");
  }
};

struct EmitterSpec {
  std::size_t class_id = 0;
  Pattern pri = Pattern::constant(1000.0);
  Pattern pw = Pattern::constant(1.0);
  Pattern rf = Pattern::constant(9000.0);
  // When set, each sequence starts at a uniformly drawn offset into every
  // periodic pattern instead of at pulse 0.
  bool random_phase = false;

  void validate() const {
    const auto id = "emitter " + std::to_string(class_id);
    pri.validate(id + " pri");
    pw.validate(id + " pw");
    rf.validate(id + " rf");
    if (pri.kind == PatternKind::hop || pw.kind == PatternKind::hop) {
      throw ConfigError(id + ": hop patterns apply to rf only");
    }
    if (rf.kind == PatternKind::stagger || rf.kind == PatternKind::jitter) {
      throw ConfigError(id + ": rf supports constant or hop patterns only");
    }
    if (!(pw.upper_bound() < pri.lower_bound())) {
      throw ConfigError(id + ": maximum pw must be below minimum pri");
    }
  }
};

struct SimConfig {
  std::vector<EmitterSpec> emitters;  // emitters[c].class_id == c
  std::vector<std::size_t> sequences_per_class;
  std::size_t min_length = kMinSequenceLength;
  std::size_t max_length = kMaxSequenceLength;
  double measurement_noise_fraction = 0.0;
  // When set, each sequence draws its own noise fraction uniformly from
  // [0, measurement_noise_fraction], mimicking intercepts at varying SNR.
  bool vary_noise = false;
  std::uint64_t seed = 0;

  std::size_t num_classes() const { return emitters.size(); }

  void validate() const {
    if (emitters.empty()) throw ConfigError("simulation needs at least one emitter");
    if (sequences_per_class.size() != emitters.size()) {
      throw ConfigError("sequences_per_class must list one count per emitter");
    }
    for (std::size_t c = 0; c < emitters.size(); ++c) {
      if (emitters[c].class_id != c) throw ConfigError("emitter class ids must be 0..C-1 in order");
      emitters[c].validate();
      if (sequences_per_class[c] < 2) throw ConfigError("every class needs at least 2 sequences");
    }
    if (min_length < kMinSequenceLength || max_length > kMaxSequenceLength || min_length > max_length) {
      throw ConfigError("length range must satisfy 7 <= min_length <= max_length <= 512");
    }
    if (!(measurement_noise_fraction >= 0.0)) throw ConfigError("measurement noise must be >= 0");
  }

  // Reads `<prefix>seed`, `<prefix>min_length`, `<prefix>max_length`,
  // `<prefix>measurement_noise`, `<prefix>vary_noise`, `<prefix>classes` and, per class c,
  // `<prefix>emitter.<c>.{count,pri,pw,rf,random_phase}`.
  static SimConfig from_config(const KeyValueConfig& kv, const std::string& prefix = "sim.") {
    SimConfig cfg;
    cfg.seed = kv.get_int<std::uint64_t>(prefix + "seed", 0);
    cfg.min_length = kv.get_int<std::size_t>(prefix + "min_length", kMinSequenceLength);
    cfg.max_length = kv.get_int<std::size_t>(prefix + "max_length", kMaxSequenceLength);
    cfg.measurement_noise_fraction = kv.get_double(prefix + "measurement_noise", 0.0);
    cfg.vary_noise = kv.get_bool(prefix + "vary_noise", false);
    const auto classes = kv.get_int<std::size_t>(prefix + "classes", 0);
    for (std::size_t c = 0; c < classes; ++c) {
      const auto e = prefix + "emitter." + std::to_string(c) + ".";
      EmitterSpec spec;
      spec.class_id = c;
      spec.pri = Pattern::parse(kv.require_string(e + "pri"));
      spec.pw = Pattern::parse(kv.require_string(e + "pw"));
      spec.rf = Pattern::parse(kv.require_string(e + "rf"));
      spec.random_phase = kv.get_bool(e + "random_phase", false);
      cfg.emitters.push_back(spec);
      cfg.sequences_per_class.push_back(kv.get_int<std::size_t>(e + "count", 0));
    }
    cfg.validate();
    return cfg;
  }
};

// Draws one sequence. Noise sigma per attribute is noise_fraction times the
// pattern mean; values are clamped to stay strictly positive.
inline PulseSequence generate_sequence(const EmitterSpec& spec, std::size_t length, double noise_fraction,
                                       Rng& rng) {
  const std::array<const Pattern*, kNumAttributes> patterns{&spec.pri, &spec.pw, &spec.rf};
  std::array<std::size_t, kNumAttributes> phase{};
  if (spec.random_phase) {
    for (std::size_t j = 0; j < kNumAttributes; ++j) {
      std::uniform_int_distribution<std::size_t> pick(0, patterns[j]->period() - 1);
      phase[j] = pick(rng);
    }
  }
  std::array<std::normal_distribution<double>, kNumAttributes> noise;
  for (std::size_t j = 0; j < kNumAttributes; ++j) {
    noise[j] = std::normal_distribution<double>(0.0, noise_fraction * patterns[j]->mean());
  }

  PulseSequence seq;
  seq.label = spec.class_id;
  seq.pulses.resize(length);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t j = 0; j < kNumAttributes; ++j) {
      double v = patterns[j]->value_at(t + phase[j], rng);
      if (noise_fraction > 0.0) v += noise[j](rng);
      seq.pulses[t][j] = std::max(v, kPositiveFloor);
    }
  }
  return seq;
}

// Every sequence draws from its own child seed (class, index), so output is
// independent of generation order.
inline Dataset generate_dataset(const SimConfig& cfg) {
  cfg.validate();
  std::vector<PulseSequence> seqs;
  for (std::size_t c = 0; c < cfg.num_classes(); ++c) {
    const auto class_seed = derive_seed(cfg.seed, "class", c);
    for (std::size_t i = 0; i < cfg.sequences_per_class[c]; ++i) {
      auto rng = make_rng(class_seed, "sequence", i);
      std::uniform_int_distribution<std::size_t> len(cfg.min_length, cfg.max_length);
      const auto length = len(rng);
      double noise = cfg.measurement_noise_fraction;
      if (cfg.vary_noise) noise = std::uniform_real_distribution<double>(0.0, noise)(rng);
      seqs.push_back(generate_sequence(cfg.emitters[c], length, noise, rng));
    }
  }
  return Dataset(std::move(seqs), cfg.num_classes());
}

// v -> v + e, e ~ N(0, (noise_fraction * v)^2), floored at kPositiveFloor.
inline Dataset add_noise(const Dataset& ds, double noise_fraction, std::uint64_t seed) {
  if (!(noise_fraction >= 0.0 && noise_fraction <= 0.5)) {
    throw ConfigError("noise fraction must lie in [0, 0.5]");
  }
  if (noise_fraction == 0.0) return ds;
  std::vector<PulseSequence> seqs = ds.sequences();
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    auto rng = make_rng(seed, "noise", i);
    for (auto& p : seqs[i].pulses) {
      for (std::size_t j = 0; j < kNumAttributes; ++j) {
        const double v = p[j];
        p[j] = std::max(v + noise_fraction * v * unit(rng), kPositiveFloor);
      }
    }
  }
  return Dataset(std::move(seqs), ds.num_classes());
}

}  // namespace emitter
