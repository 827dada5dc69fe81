#pragma once

// Deterministic stand-in for a pretrained dense retriever: hashed
// bag-of-tokens -> mean-pooled embedding -> frozen linear projection with
// trainable low-rank adapters -> unit-normalized output. The frozen base
// plus a rank-r correction (projection + up*down) exposes the same pooled
// embedding contract a transformer encoder would.

#include <cctype>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hicl/common.hpp"
#include "hicl/matrix.hpp"

namespace hicl {

enum class EncoderMode { lora, full };

inline std::string to_string(EncoderMode m) { return m == EncoderMode::lora ? "lora" : "full"; }

inline EncoderMode encoder_mode_from_string(const std::string& s) {
  if (s == "lora") return EncoderMode::lora;
  if (s == "full") return EncoderMode::full;
  throw ConfigError("unknown encoder mode '" + s + "' (expected 'lora' or 'full')");
}

struct EncoderConfig {
  uint32_t vocab_buckets = 4096;
  uint32_t hidden_dim = 64;
  uint32_t out_dim = 32;
  uint32_t lora_rank = 4;
  uint64_t seed = 1234;
  uint32_t max_tokens = 8192;
  EncoderMode mode = EncoderMode::lora;

  void validate() const {
    if (vocab_buckets == 0 || hidden_dim == 0 || out_dim == 0 || max_tokens == 0)
      throw ConfigError("encoder dimensions must be positive");
    if (mode == EncoderMode::lora) {
      const uint32_t cap = std::min(out_dim, hidden_dim) / 2;
      if (lora_rank == 0 || lora_rank > cap)
        throw ConfigError("lora_rank " + std::to_string(lora_rank) +
                          " violates rank << min(out_dim, hidden_dim); must be in [1, " +
                          std::to_string(cap) + "]");
    }
  }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct EncoderParams {
  EncoderConfig config;
  Matrix token_table;  // vocab_buckets x hidden_dim, frozen
  Matrix projection;   // out_dim x hidden_dim, frozen in lora mode
  Matrix lora_down;    // lora_rank x hidden_dim (the A factor), trainable
  Matrix lora_up;      // out_dim x lora_rank (the B factor), trainable, zero at init

  size_t trainable_count() const {
    if (config.mode == EncoderMode::lora) return lora_down.size() + lora_up.size();
    return projection.size();
  }

  size_t total_count() const {
    return token_table.size() + projection.size() + lora_down.size() + lora_up.size();
  }

  double trainable_fraction() const {
    return static_cast<double>(trainable_count()) /
           static_cast<double>(token_table.size() + projection.size());
  }
};

// Frozen tensors are filled from one seeded stream scaled by 1/sqrt(fan_in);
// the up factor starts at zero so the adapted projection equals the base.
inline EncoderParams init_params(const EncoderConfig& cfg) {
  cfg.validate();
  EncoderParams p;
  p.config = cfg;
  Rng rng(cfg.seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
  p.token_table = Matrix(cfg.vocab_buckets, cfg.hidden_dim);
  fill_uniform(p.token_table, rng, scale);
  p.projection = Matrix(cfg.out_dim, cfg.hidden_dim);
  fill_uniform(p.projection, rng, scale);
  if (cfg.mode == EncoderMode::lora) {
    p.lora_down = Matrix(cfg.lora_rank, cfg.hidden_dim);
    fill_uniform(p.lora_down, rng, scale);
    p.lora_up = Matrix(cfg.out_dim, cfg.lora_rank, 0.0);
  }
  return p;
}

// Lowercase, split on non-alphanumeric bytes, FNV-1a 64 mod vocab_buckets,
// truncated to max_tokens.
inline std::vector<uint32_t> tokenize(std::string_view text, const EncoderConfig& cfg) {
  std::vector<uint32_t> buckets;
  std::string word;
  auto flush = [&] {
    if (!word.empty() && buckets.size() < cfg.max_tokens) {
      buckets.push_back(static_cast<uint32_t>(fnv1a64(word) % cfg.vocab_buckets));
    }
    word.clear();
  };
  for (char ch : text) {
    const unsigned char c = static_cast<unsigned char>(ch);
    if (c >= 'a' && c <= 'z') {
      word += static_cast<char>(c);
    } else if (c >= 'A' && c <= 'Z') {
      word += static_cast<char>(c - 'A' + 'a');
    } else if (c >= '0' && c <= '9') {
      word += static_cast<char>(c);
    } else {
      flush();
    }
    if (buckets.size() >= cfg.max_tokens) return buckets;
  }
  flush();
  return buckets;
}

struct EmbeddingVector {
  std::vector<double> values;
  bool degenerate = false;  // zero-pool or zero-projection fallback was taken
};

// Full forward pass with the intermediates backprop needs.
struct EncodeTrace {
  std::vector<double> pooled;     // mean of token-table rows
  std::vector<double> projected;  // pre-normalization output
  double projected_norm = 0.0;
  bool degenerate = false;
  std::vector<double> unit;       // final embedding, L2 norm 1 (or the e1 fallback)
};

inline EncodeTrace encode_trace(std::span<const uint32_t> tokens, const EncoderParams& p) {
  const EncoderConfig& cfg = p.config;
  EncodeTrace t;
  t.pooled.assign(cfg.hidden_dim, 0.0);

  if (!tokens.empty()) {
    // Aggregate counts per bucket in ascending bucket order so the pooled
    // vector is exactly invariant to token order.
    std::map<uint32_t, uint32_t> counts;
    for (uint32_t b : tokens) ++counts[b];
    const double inv = 1.0 / static_cast<double>(tokens.size());
    for (const auto& [bucket, count] : counts) {
      const auto row = p.token_table.row(bucket);
      const double wgt = inv * static_cast<double>(count);
      for (uint32_t c = 0; c < cfg.hidden_dim; ++c) t.pooled[c] += wgt * row[c];
    }
  }

  t.projected = matvec(p.projection, t.pooled);
  if (cfg.mode == EncoderMode::lora) {
    const std::vector<double> down = matvec(p.lora_down, t.pooled);
    const std::vector<double> up = matvec(p.lora_up, down);
    for (uint32_t r = 0; r < cfg.out_dim; ++r) t.projected[r] += up[r];
  }

  t.projected_norm = l2_norm(t.projected);
  if (t.projected_norm < 1e-12) {
    t.degenerate = true;
    t.unit.assign(cfg.out_dim, 0.0);
    t.unit[0] = 1.0;
  } else {
    t.unit.resize(cfg.out_dim);
    for (uint32_t r = 0; r < cfg.out_dim; ++r) t.unit[r] = t.projected[r] / t.projected_norm;
  }
  return t;
}

inline EmbeddingVector encode_tokens(std::span<const uint32_t> tokens, const EncoderParams& p) {
  EncodeTrace t = encode_trace(tokens, p);
  return {std::move(t.unit), t.degenerate};
}

inline EmbeddingVector encode(std::string_view text, const EncoderParams& p) {
  const std::vector<uint32_t> tokens = tokenize(text, p.config);
  return encode_tokens(tokens, p);
}

// Dot product of unit vectors, clamped to [-1, 1].
inline double embedding_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size())
    throw DataError("embedding similarity dimension mismatch: " + std::to_string(a.values.size()) +
                    " vs " + std::to_string(b.values.size()));
  const double d = dot(a.values, b.values);
  return std::min(1.0, std::max(-1.0, d));
}

}  // namespace hicl
