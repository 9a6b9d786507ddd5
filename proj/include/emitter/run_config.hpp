// SPDX-License-Identifier: Apache-2.0
//
// Whole-invocation configuration: one key = value file holding the simulator
// (`sim.`), model (`model.`), training (`train.`) and experiment
// (`experiment.`) sections plus a single top-level `seed`. Every component
// seed is derived from that one value by name, unless a section pins its own.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "emitter/config.hpp"
#include "emitter/model.hpp"
#include "emitter/pulse_sim.hpp"
#include "emitter/train_eval.hpp"

namespace emitter {

struct ExperimentConfig {
  double train_fraction = 0.778;
  std::size_t seeds = 3;
  std::vector<double> noise_fractions = kDefaultNoiseFractions;
  // Minimum fraction of its clean macro accuracy the proposed model must keep
  // at the largest noise fraction. Frozen after calibrating the preset.
  double noise_retention_min = 0.75;

  void validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("experiment.train_fraction must lie in (0, 1)");
    if (seeds < 1) throw ConfigError("experiment.seeds must be >= 1");
    if (noise_fractions.empty()) throw ConfigError("experiment.noise_fractions must not be empty");
    for (double f : noise_fractions) {
      if (!(f >= 0.0 && f <= 0.5)) throw ConfigError("noise fractions must lie in [0, 0.5]");
    }
  }
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::optional<SimConfig> sim;  // present when the file defines sim.classes
  ModelConfig model;
  TrainConfig train;
  ExperimentConfig experiment;

  std::uint64_t split_seed() const { return derive_seed(seed, "split"); }
  std::uint64_t sweep_seed() const { return derive_seed(seed, "sweep"); }

  const SimConfig& require_sim() const {
    if (!sim) throw ConfigError("this command needs a simulator section (sim.classes and sim.emitter.*)");
    return *sim;
  }

  // `seed_override` (the --seed flag) replaces the file's top-level seed.
  static RunConfig from_config(const KeyValueConfig& kv, std::optional<std::uint64_t> seed_override = {}) {
    RunConfig rc;
    rc.seed = kv.get_int<std::uint64_t>("seed", 0);
    if (seed_override) rc.seed = *seed_override;

    if (kv.has("sim.classes")) {
      const bool pinned = kv.has("sim.seed");
      auto sim = SimConfig::from_config(kv);
      if (!pinned || seed_override) sim.seed = derive_seed(rc.seed, "sim");
      rc.sim = std::move(sim);
    }
    rc.model = ModelConfig::from_config(kv);
    if (rc.sim) rc.model.num_classes = kv.has("model.classes") ? rc.model.num_classes : rc.sim->num_classes();
    rc.model.validate();
    rc.train = TrainConfig::from_config(kv);
    rc.train.seed = derive_seed(rc.seed, "train");

    auto& e = rc.experiment;
    e.train_fraction = kv.get_double("experiment.train_fraction", e.train_fraction);
    e.seeds = kv.get_int<std::size_t>("experiment.seeds", e.seeds);
    e.noise_fractions = kv.get_doubles("experiment.noise_fractions", e.noise_fractions);
    e.noise_retention_min = kv.get_double("experiment.noise_retention_min", e.noise_retention_min);
    e.validate();
    kv.reject_unknown();
    return rc;
  }

  static RunConfig load(const std::string& path, std::optional<std::uint64_t> seed_override = {}) {
    return from_config(KeyValueConfig::load(path), seed_override);
  }
};

// Simulated dataset for `rc` and its stratified train/test split.
inline std::pair<Dataset, Dataset> simulate_and_split(const RunConfig& rc) {
  const auto ds = generate_dataset(rc.require_sim());
  return split_dataset(ds, rc.experiment.train_fraction, rc.split_seed());
}

}  // namespace emitter
