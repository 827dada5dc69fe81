#pragma once

// Considered-concept index, sparse multi-hot label vectors, depth weights,
// and the weighted label-space cosine. The index covers the concepts that
// actually occur in the corpus annotations (after optional ancestor
// expansion), in lexicographic ui order.

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "hicl/mesh.hpp"

namespace hicl {

class ConceptIndex {
 public:
  static ConceptIndex build(const std::vector<std::set<std::string>>& annotations,
                            const MeshHierarchy& h, bool ancestor_expansion) {
    std::set<std::string> all;
    for (const auto& labels : annotations) {
      for (const std::string& ui : labels) {
        if (!h.contains(ui))
          throw LookupError("annotation references unknown descriptor '" + ui + "'");
      }
      if (ancestor_expansion) {
        const auto expanded = h.expand(labels);
        all.insert(expanded.begin(), expanded.end());
      } else {
        all.insert(labels.begin(), labels.end());
      }
    }
    ConceptIndex idx;
    idx.ids_.assign(all.begin(), all.end());  // std::set iterates sorted
    idx.pos_.reserve(idx.ids_.size());
    for (uint32_t j = 0; j < idx.ids_.size(); ++j) idx.pos_.emplace(idx.ids_[j], j);
    return idx;
  }

  uint32_t size() const { return static_cast<uint32_t>(ids_.size()); }
  const std::vector<std::string>& concept_ids() const { return ids_; }
  const std::string& concept_at(uint32_t j) const { return ids_[j]; }

  std::optional<uint32_t> find(const std::string& ui) const {
    auto it = pos_.find(ui);
    if (it == pos_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, uint32_t> pos_;
};

// Sparse multi-hot vector over a ConceptIndex of dimension `dim`.
struct LabelVector {
  uint32_t dim = 0;
  std::vector<uint32_t> active;  // strictly increasing, all < dim
};

inline LabelVector vectorize(const std::set<std::string>& labels, const ConceptIndex& idx,
                             const MeshHierarchy& h, bool ancestor_expansion) {
  const std::set<std::string> effective = ancestor_expansion ? h.expand(labels) : labels;
  LabelVector v;
  v.dim = idx.size();
  v.active.reserve(effective.size());
  for (const std::string& ui : effective) {
    const auto j = idx.find(ui);
    if (!j)
      throw LookupError("label '" + ui +
                        "' is not in the concept index (index must be built from the same "
                        "corpus and expansion flag)");
    v.active.push_back(*j);
  }
  std::sort(v.active.begin(), v.active.end());
  v.active.erase(std::unique(v.active.begin(), v.active.end()), v.active.end());
  return v;
}

using WeightVector = std::vector<double>;

// weights[j] = ln(depth(c_j) + 1) when depth weighting is on, 1.0 otherwise.
inline WeightVector depth_weights(const ConceptIndex& idx, const MeshHierarchy& h,
                                  bool depth_weighting) {
  WeightVector w(idx.size(), 1.0);
  if (depth_weighting) {
    for (uint32_t j = 0; j < idx.size(); ++j)
      w[j] = std::log(static_cast<double>(h.depth(idx.concept_at(j))) + 1.0);
  }
  return w;
}

// Cosine of the weighted multi-hot vectors, computed over the sparse active
// sets. Zero when either active set is empty; clamped to [0, 1].
inline double label_similarity(const LabelVector& a, const LabelVector& b,
                               const WeightVector& w) {
  if (a.dim != b.dim || a.dim != w.size())
    throw DataError("label similarity dimension mismatch: " + std::to_string(a.dim) + " vs " +
                    std::to_string(b.dim) + " vs weights " + std::to_string(w.size()));
  if (a.active.empty() || b.active.empty()) return 0.0;
  double num = 0.0, na = 0.0, nb = 0.0;
  size_t ia = 0, ib = 0;
  while (ia < a.active.size() && ib < b.active.size()) {
    const uint32_t ja = a.active[ia];
    const uint32_t jb = b.active[ib];
    if (ja == jb) {
      num += w[ja] * w[ja];
      ++ia;
      ++ib;
    } else if (ja < jb) {
      ++ia;
    } else {
      ++ib;
    }
  }
  for (uint32_t j : a.active) na += w[j] * w[j];
  for (uint32_t j : b.active) nb += w[j] * w[j];
  const double sim = num / (std::sqrt(na) * std::sqrt(nb));
  return std::min(1.0, std::max(0.0, sim));
}

}  // namespace hicl
