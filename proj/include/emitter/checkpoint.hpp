// SPDX-License-Identifier: Apache-2.0
//
// Model checkpoint file:
//
//   "EMITCKPT"                      8-byte magic
//   u32 version                     (1)
//   u64 n, n bytes of text          key = value lines: model config, the
//                                   normalization stats, training progress
//   u32 tensor count
//   per tensor: u32 name length, name, u64 rows, u64 cols,
//               rows*cols IEEE-754 binary64 values, row-major
//
// All integers and floats are little-endian regardless of host order.
#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "emitter/model.hpp"
#include "emitter/nn/optim.hpp"

namespace emitter {

inline constexpr char kCheckpointMagic[8] = {'E', 'M', 'I', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Optimizer progress stored so that training can be resumed.
struct TrainingState {
  std::size_t epochs_completed = 0;
  std::vector<double> loss_history;
  std::uint64_t seed = 0;
  long long optimizer_steps = 0;
  std::vector<Matrix> adam_m, adam_v;
};

struct Checkpoint {
  SequenceClassifier model;
  DomainStats stats;
  TrainingState state;
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_uint(std::istream& in, int bytes) {
  unsigned char b[8] = {};
  in.read(reinterpret_cast<char*>(b), bytes);
  if (!in) throw FormatError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
}

}  // namespace detail

inline void write_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  auto& model = const_cast<SequenceClassifier&>(ckpt.model);
  std::ostringstream text;
  text << model.config().to_text();
  text << ckpt.stats.to_text();
  text << "train.epochs_completed = " << ckpt.state.epochs_completed << '\n';
  text << "train.seed = " << ckpt.state.seed << '\n';
  text << "train.optimizer_steps = " << ckpt.state.optimizer_steps << '\n';
  text << "train.loss_history =";
  for (double l : ckpt.state.loss_history) text << ' ' << format_double(l);
  text << '\n';
  const auto header = text.str();

  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  const auto params = model.parameters();
  const bool with_optimizer = ckpt.state.adam_m.size() == params.size() && !params.empty();
  detail::put_u32(out, static_cast<std::uint32_t>(params.size() * (with_optimizer ? 3 : 1)));
  for (const auto* p : params) detail::put_tensor(out, p->name, p->value);
  if (with_optimizer) {
    for (std::size_t k = 0; k < params.size(); ++k) detail::put_tensor(out, "adam.m." + params[k]->name, ckpt.state.adam_m[k]);
    for (std::size_t k = 0; k < params.size(); ++k) detail::put_tensor(out, "adam.v." + params[k]->name, ckpt.state.adam_v[k]);
  }
}

inline Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw FormatError("not a checkpoint file");
  const auto version = detail::get_uint(in, 4);
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto text_len = detail::get_uint(in, 8);
  if (text_len > (1u << 26)) throw FormatError("checkpoint header too large");
  std::string text(text_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(text_len));
  if (!in) throw FormatError("checkpoint truncated");
  const auto kv = KeyValueConfig::parse_string(text);

  Checkpoint ckpt;
  const auto cfg = ModelConfig::from_config(kv);
  ckpt.stats = DomainStats::from_config(kv);
  ckpt.state.epochs_completed = kv.get_int<std::size_t>("train.epochs_completed", 0);
  ckpt.state.seed = kv.get_int<std::uint64_t>("train.seed", 0);
  ckpt.state.optimizer_steps = kv.get_int<long long>("train.optimizer_steps", 0);
  ckpt.state.loss_history = kv.get_doubles("train.loss_history", {});
  kv.reject_unknown();
  ckpt.model = SequenceClassifier::build(cfg, 0);

  std::map<std::string, Matrix> tensors;
  const auto count = detail::get_uint(in, 4);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = detail::get_uint(in, 4);
    if (len > 4096) throw FormatError("tensor name too long");
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    const auto rows = detail::get_uint(in, 8);
    const auto cols = detail::get_uint(in, 8);
    if (rows * cols > (1ull << 28)) throw FormatError("tensor '" + name + "' too large");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = std::bit_cast<double>(detail::get_uint(in, 8));
    tensors[name] = std::move(m);
  }

  auto take = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
    if (it->second.rows() != rows || it->second.cols() != cols) {
      throw FormatError("tensor '" + name + "' has the wrong shape");
    }
    Matrix m = std::move(it->second);
    tensors.erase(it);
    return m;
  };
  const auto params = ckpt.model.parameters();
  for (auto* p : params) p->value = take(p->name, p->value.rows(), p->value.cols());
  if (!tensors.empty()) {
    for (auto* p : params) {
      ckpt.state.adam_m.push_back(take("adam.m." + p->name, p->value.rows(), p->value.cols()));
    }
    for (auto* p : params) {
      ckpt.state.adam_v.push_back(take("adam.v." + p->name, p->value.rows(), p->value.cols()));
    }
  }
  if (!tensors.empty()) throw FormatError("checkpoint has unexpected tensor '" + tensors.begin()->first + "'");
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot open '" + path + "' for writing");
  write_checkpoint(ckpt, out);
  out.flush();
  if (!out) throw RuntimeFailure("write failed for '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot open checkpoint '" + path + "'");
  try {
    return read_checkpoint(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace emitter
