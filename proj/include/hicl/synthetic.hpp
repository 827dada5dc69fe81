#pragma once

// Seeded generators for desk-scale experiments: a random hierarchy with a
// few top-level branches, and a clustered corpus over it whose texts mix
// label-specific signature tokens with shared filler and per-document noise.
// The filler and noise mass keeps untrained embeddings nearly uninformative
// about label overlap, while the signature tokens keep the task learnable.

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "hicl/trainer.hpp"

namespace hicl {

struct SyntheticHierarchyConfig {
  uint32_t descriptors = 200;
  std::string branches = "ABC";
  uint32_t max_depth = 5;
  double cross_link_prob = 0.1;  // chance of a second tree number in the same branch
  uint64_t seed = 7;
};

namespace detail {

inline std::string synthetic_ui(uint32_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "D%06u", index + 1);
  return buf;
}

inline std::string child_segment(uint32_t index) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%03u", index);
  return buf;
}

}  // namespace detail

inline MeshHierarchy synthetic_hierarchy(const SyntheticHierarchyConfig& cfg = {}) {
  if (cfg.branches.empty()) throw ConfigError("synthetic hierarchy needs at least one branch");
  for (char c : cfg.branches)
    if (std::string(kMeshBranchLetters).find(c) == std::string::npos)
      throw ConfigError(std::string("invalid branch letter '") + c + "'");
  if (cfg.max_depth < 2) throw ConfigError("synthetic hierarchy max_depth must be at least 2");
  if (cfg.descriptors < cfg.branches.size())
    throw ConfigError("synthetic hierarchy needs at least one descriptor per branch");

  Rng rng(cfg.seed);
  MeshHierarchy h;
  struct Node {
    std::string tree;
    uint32_t depth;
    char branch;
  };
  std::vector<Node> nodes;
  std::map<std::string, uint32_t> child_count;
  std::map<char, std::vector<size_t>> by_branch;

  auto add_descriptor = [&](uint32_t index, const std::vector<std::string>& trees) {
    MeshDescriptor desc;
    desc.ui = detail::synthetic_ui(index);
    desc.name = "synthetic concept " + std::to_string(index + 1);
    for (const std::string& t : trees) desc.tree_numbers.push_back(TreeNumber::parse(t));
    h.add(std::move(desc));
  };

  uint32_t index = 0;
  for (char letter : cfg.branches) {
    const std::string tree = std::string(1, letter) + "01";
    nodes.push_back({tree, 1, letter});
    by_branch[letter].push_back(nodes.size() - 1);
    add_descriptor(index++, {tree});
  }

  while (index < cfg.descriptors) {
    size_t parent_idx;
    do {
      parent_idx = static_cast<size_t>(rng.below(nodes.size()));
    } while (nodes[parent_idx].depth >= cfg.max_depth);
    const Node& parent = nodes[parent_idx];
    const std::string tree =
        parent.tree + "." + detail::child_segment(++child_count[parent.tree]);
    std::vector<std::string> trees = {tree};

    if (rng.uniform() < cfg.cross_link_prob) {
      const auto& pool = by_branch[parent.branch];
      const Node& second = nodes[pool[static_cast<size_t>(rng.below(pool.size()))]];
      if (second.depth < cfg.max_depth)
        trees.push_back(second.tree + "." + detail::child_segment(++child_count[second.tree]));
    }

    nodes.push_back({tree, parent.depth + 1, parent.branch});
    by_branch[parent.branch].push_back(nodes.size() - 1);
    add_descriptor(index++, trees);
  }

  ParseStats stats;
  stats.descriptors = h.size();
  h.set_stats(stats);
  return h;
}

struct SyntheticCorpusConfig {
  uint32_t n_docs = 500;
  uint32_t clusters = 12;
  uint32_t signature_tokens_per_label = 3;
  uint32_t signature_repeats = 2;
  uint32_t filler_vocab = 40;
  uint32_t filler_tokens = 60;
  uint32_t noise_tokens = 20;
  double ancestor_keep_prob = 0.5;
  double extra_label_prob = 0.3;
  uint64_t seed = 7;
};

// Documents come in clusters around anchor concepts spread over the branches,
// so label similarity covers a wide range: near-duplicates within a cluster,
// partial overlap across clusters of one branch, exact zero across branches.
inline Corpus synthetic_corpus(const MeshHierarchy& h, const SyntheticCorpusConfig& cfg = {}) {
  if (cfg.n_docs == 0) throw ConfigError("synthetic corpus needs at least one document");
  if (cfg.clusters == 0) throw ConfigError("synthetic corpus needs at least one cluster");

  std::map<char, std::vector<std::string>> deep_by_branch;
  std::map<char, std::vector<std::string>> all_by_branch;
  for (const auto& [ui, desc] : h.descriptors()) {
    const char branch = desc.tree_numbers.front().branch();
    all_by_branch[branch].push_back(ui);
    if (h.depth(ui) >= 2) deep_by_branch[branch].push_back(ui);
  }
  std::vector<char> branches;
  for (const auto& [branch, uis] : deep_by_branch) branches.push_back(branch);
  if (branches.empty())
    throw DataError("synthetic corpus needs descriptors below the branch roots");

  Rng rng(cfg.seed);
  std::vector<std::string> anchors;
  anchors.reserve(cfg.clusters);
  for (uint32_t c = 0; c < cfg.clusters; ++c) {
    const auto& pool = deep_by_branch[branches[c % branches.size()]];
    anchors.push_back(pool[static_cast<size_t>(rng.below(pool.size()))]);
  }

  Corpus corpus;
  corpus.docs.reserve(cfg.n_docs);
  for (uint32_t d = 0; d < cfg.n_docs; ++d) {
    const std::string& anchor = anchors[d % cfg.clusters];
    const char branch = h.descriptor(anchor).tree_numbers.front().branch();

    Document doc;
    char id_buf[16];
    std::snprintf(id_buf, sizeof(id_buf), "doc%04u", d);
    doc.id = id_buf;

    doc.mesh.insert(anchor);
    for (const std::string& ancestor : h.ancestors(anchor))
      if (rng.uniform() < cfg.ancestor_keep_prob) doc.mesh.insert(ancestor);
    if (rng.uniform() < cfg.extra_label_prob) {
      const auto& pool = all_by_branch[branch];
      doc.mesh.insert(pool[static_cast<size_t>(rng.below(pool.size()))]);
    }

    std::string text;
    for (const std::string& ui : doc.mesh)
      for (uint32_t t = 0; t < cfg.signature_tokens_per_label; ++t)
        for (uint32_t r = 0; r < cfg.signature_repeats; ++r)
          text += "sig" + ui + "x" + std::to_string(t) + " ";
    for (uint32_t f = 0; f < cfg.filler_tokens; ++f)
      text += "filler" + std::to_string(rng.below(cfg.filler_vocab)) + " ";
    for (uint32_t n = 0; n < cfg.noise_tokens; ++n)
      text += "noise" + std::to_string(d) + "x" + std::to_string(rng.next_u64() % 100000) + " ";
    if (!text.empty()) text.pop_back();
    doc.text = std::move(text);
    corpus.docs.push_back(std::move(doc));
  }
  return corpus;
}

}  // namespace hicl
