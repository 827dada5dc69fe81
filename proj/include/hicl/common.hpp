#pragma once

// Error taxonomy and deterministic randomness primitives shared by every
// module. All pseudo-random draws in the library go through Rng so that a
// seed fully determines behavior regardless of platform or standard-library
// implementation (std::shuffle and the <random> distributions are
// implementation-defined; the raw mt19937_64 stream is not).

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hicl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input files, schema violations, unknown identifiers. CLI exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed source text; message carries line/element position.
class ParseError : public DataError {
 public:
  using DataError::DataError;
};

// Identifier not present in the queried structure.
class LookupError : public DataError {
 public:
  using DataError::DataError;
};

// Invalid configuration values (dimension constraints, empty grids, ...).
class ConfigError : public DataError {
 public:
  using DataError::DataError;
};

// Non-finite losses or gradients. CLI exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Stable 64-bit combine for deriving stream seeds from a base seed.
inline uint64_t mix_seed(uint64_t base, uint64_t salt) {
  return splitmix64(base ^ splitmix64(salt));
}

// FNV-1a, 64-bit. Fixed constants so token buckets are stable everywhere.
inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [-1, 1).
  double uniform_pm1() { return 2.0 * uniform() - 1.0; }

  // Unbiased integer in [0, n) via rejection sampling.
  uint64_t below(uint64_t n) {
    if (n == 0) throw Error("Rng::below called with n == 0");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Draws k distinct elements; preserves the draw order.
  template <typename T>
  std::vector<T> sample(const std::vector<T>& pool, size_t k) {
    std::vector<T> scratch = pool;
    if (k > scratch.size()) k = scratch.size();
    std::vector<T> out;
    out.reserve(k);
    size_t remaining = scratch.size();
    for (size_t i = 0; i < k; ++i) {
      const size_t j = static_cast<size_t>(below(remaining));
      out.push_back(scratch[j]);
      std::swap(scratch[j], scratch[remaining - 1]);
      --remaining;
    }
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(s.substr(start));
      break;
    }
    parts.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

}  // namespace hicl
