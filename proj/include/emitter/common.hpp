// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace emitter {

// Error hierarchy. Every failure surfaced to a caller derives from Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file (dataset, checkpoint, config syntax).
struct FormatError : Error {
  using Error::Error;
};

// Semantically invalid configuration or argument combination.
struct ConfigError : Error {
  using Error::Error;
};

// Failure while running an experiment (non-finite loss, I/O).
struct RuntimeFailure : Error {
  using Error::Error;
};

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Named seed derivation: all randomness in a run flows from one base seed
// through (component, index) pairs so results do not depend on execution order.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view component,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(base ^ fnv1a(component)) + index);
}

inline Rng make_rng(std::uint64_t base, std::string_view component, std::uint64_t index = 0) {
  return Rng{derive_seed(base, component, index)};
}

// Shortest text that reads back to the identical double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw Error("cannot format value");
  return std::string(buf, end);
}

// Short human-readable rendering for reports.
inline std::string format_fixed(double v, int precision = 4) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
  if (ec != std::errc{}) throw Error("cannot format value");
  return std::string(buf, end);
}

// Strict parse: the whole token must be a number. Accepts "nan"/"inf" so that
// callers can reject them with a field-specific message.
inline bool parse_double(std::string_view token, double& out) {
  if (token.empty()) return false;
  auto first = token.data();
  auto last = token.data() + token.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

template <typename Int>
bool parse_int(std::string_view token, Int& out) {
  if (token.empty()) return false;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc{} && ptr == token.data() + token.size();
}

}  // namespace emitter
