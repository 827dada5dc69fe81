#pragma once

// Exhaustive pair mining over label vectors and seeded batch assembly.
// Pairs are unordered (i < j) and each counted once. A pair is a positive
// when its label similarity exceeds beta, a negative when it is exactly
// zero, and excluded otherwise.

#include <cstdint>
#include <unordered_set>
#include <vector>

#include "hicl/common.hpp"
#include "hicl/label_space.hpp"

namespace hicl {

struct MiningConfig {
  double beta = 0.3;
  uint32_t batch_size = 32;
  uint32_t negatives_per_anchor = 8;
  uint64_t seed = 42;
};

struct ScoredPair {
  uint32_t i = 0, j = 0;  // i < j
  double sim = 0.0;
};

struct DocPair {
  uint32_t i = 0, j = 0;  // i < j
  friend bool operator==(const DocPair&, const DocPair&) = default;
};

struct PairSet {
  uint32_t n_docs = 0;
  std::vector<ScoredPair> positives;  // sorted by (i, j)
  std::vector<DocPair> negatives;     // sorted by (i, j)
  uint64_t excluded_count = 0;        // pairs with 0 < sim <= beta

  uint64_t total_pairs() const {
    return positives.size() + negatives.size() + excluded_count;
  }
};

inline PairSet mine_pairs(const std::vector<LabelVector>& vectors, const WeightVector& w,
                          const MiningConfig& cfg) {
  if (vectors.size() < 2)
    throw DataError("pair mining requires at least 2 documents, got " +
                    std::to_string(vectors.size()));
  PairSet out;
  out.n_docs = static_cast<uint32_t>(vectors.size());
  for (uint32_t i = 0; i + 1 < vectors.size(); ++i) {
    for (uint32_t j = i + 1; j < vectors.size(); ++j) {
      const double sim = label_similarity(vectors[i], vectors[j], w);
      if (sim > cfg.beta) {
        out.positives.push_back({i, j, sim});
      } else if (sim == 0.0) {
        out.negatives.push_back({i, j});
      } else {
        ++out.excluded_count;
      }
    }
  }
  return out;
}

struct BatchAnchor {
  uint32_t doc = 0;
  std::vector<std::pair<uint32_t, double>> positives;  // (doc, label similarity)
  std::vector<uint32_t> negatives;
};

struct PairBatch {
  std::vector<BatchAnchor> anchors;

  // Unique document ids referenced by the batch, ascending.
  std::vector<uint32_t> docs() const {
    std::vector<uint32_t> out;
    for (const BatchAnchor& a : anchors) {
      out.push_back(a.doc);
      for (const auto& [p, sim] : a.positives) out.push_back(p);
      for (uint32_t n : a.negatives) out.push_back(n);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

struct BatchingStats {
  uint64_t eligible_anchors = 0;
  uint64_t skipped_anchors = 0;  // anchors with positives but no negatives (or vice versa)
};

// One epoch of batches: every eligible anchor (>=1 positive and >=1 negative
// in the pair set) appears exactly once, in seeded shuffled order, with all
// of its positives and `negatives_per_anchor` sampled negatives.
inline std::vector<PairBatch> sample_batches(const PairSet& pairs, const MiningConfig& cfg,
                                             BatchingStats* stats = nullptr) {
  std::vector<std::vector<std::pair<uint32_t, double>>> pos_adj(pairs.n_docs);
  std::vector<std::vector<uint32_t>> neg_adj(pairs.n_docs);
  for (const ScoredPair& p : pairs.positives) {
    pos_adj[p.i].emplace_back(p.j, p.sim);
    pos_adj[p.j].emplace_back(p.i, p.sim);
  }
  for (const DocPair& p : pairs.negatives) {
    neg_adj[p.i].push_back(p.j);
    neg_adj[p.j].push_back(p.i);
  }

  BatchingStats local;
  std::vector<uint32_t> eligible;
  for (uint32_t d = 0; d < pairs.n_docs; ++d) {
    const bool has_pos = !pos_adj[d].empty();
    const bool has_neg = !neg_adj[d].empty();
    if (has_pos && has_neg) {
      eligible.push_back(d);
    } else if (has_pos || has_neg) {
      ++local.skipped_anchors;
    }
  }
  local.eligible_anchors = eligible.size();
  if (stats != nullptr) *stats = local;
  if (eligible.empty()) throw DataError("unbatchable corpus: no document has both a positive and a negative pair");

  Rng rng(cfg.seed);
  rng.shuffle(eligible);

  std::vector<PairBatch> batches;
  for (size_t start = 0; start < eligible.size(); start += cfg.batch_size) {
    PairBatch batch;
    const size_t end = std::min(eligible.size(), start + cfg.batch_size);
    for (size_t k = start; k < end; ++k) {
      BatchAnchor anchor;
      anchor.doc = eligible[k];
      anchor.positives = pos_adj[anchor.doc];
      anchor.negatives = rng.sample(neg_adj[anchor.doc], cfg.negatives_per_anchor);
      batch.anchors.push_back(std::move(anchor));
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace hicl
