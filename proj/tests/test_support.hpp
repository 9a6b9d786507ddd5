// SPDX-License-Identifier: Apache-2.0
//
// Small helpers shared by the unit test executables.
#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "emitter/data_model.hpp"

namespace emitter::testing {

// Random valid dataset with arbitrary real values (not simulator output), so
// round trips exercise full 17-digit precision.
inline Dataset random_dataset(std::uint64_t seed, std::size_t classes, std::size_t n, std::size_t max_len = 40) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> label(0, classes - 1), len(1, max_len);
  std::uniform_real_distribution<double> pri(50.0, 5000.0), frac(1e-3, 0.9), rf(500.0, 18000.0);
  std::vector<PulseSequence> seqs;
  for (std::size_t i = 0; i < n; ++i) {
    PulseSequence s;
    s.label = label(rng);
    s.pulses.resize(len(rng));
    for (auto& p : s.pulses) {
      p.pri = pri(rng);
      p.pw = p.pri * frac(rng);
      p.rf = rf(rng);
    }
    seqs.push_back(std::move(s));
  }
  return Dataset(std::move(seqs), classes);
}

inline PulseSequence sequence_from(const std::vector<double>& pri, const std::vector<double>& pw,
                                   const std::vector<double>& rf, std::size_t label = 0) {
  PulseSequence s;
  s.label = label;
  for (std::size_t t = 0; t < pri.size(); ++t) s.pulses.push_back({pri[t], pw[t], rf[t]});
  return s;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("emitter_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace emitter::testing
