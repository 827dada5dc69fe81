#pragma once

// MeSH descriptor vocabulary as an immutable hierarchy. Positions are given
// by dot-separated tree numbers ("C10.228.140"); every strict segment prefix
// that names a registered descriptor is an ancestor. Depth counts segments,
// so branch-top descriptors sit at depth 1.

#include <compare>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hicl/common.hpp"

namespace hicl {

inline constexpr std::string_view kMeshBranchLetters = "ABCDEFGHIJKLMNVZ";

struct TreeNumber {
  std::vector<std::string> segments;

  static TreeNumber parse(std::string_view text) {
    TreeNumber t;
    if (trim(text).empty()) throw DataError("empty tree number");
    for (const std::string& raw : split(text, '.')) {
      std::string seg = trim(raw);
      if (seg.empty())
        throw DataError("tree number '" + std::string(text) + "' has an empty segment");
      for (char c : seg) {
        const bool alnum = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
        if (!alnum)
          throw DataError("tree number '" + std::string(text) + "' contains non-alphanumeric character");
      }
      t.segments.push_back(std::move(seg));
    }
    if (kMeshBranchLetters.find(t.segments.front().front()) == std::string_view::npos)
      throw DataError("tree number '" + std::string(text) +
                      "' does not start with a MeSH branch letter");
    return t;
  }

  size_t depth() const { return segments.size(); }

  char branch() const { return segments.front().front(); }

  std::string str() const {
    std::string out = segments.front();
    for (size_t i = 1; i < segments.size(); ++i) {
      out += '.';
      out += segments[i];
    }
    return out;
  }

  bool is_strict_prefix_of(const TreeNumber& other) const {
    if (segments.size() >= other.segments.size()) return false;
    for (size_t i = 0; i < segments.size(); ++i)
      if (segments[i] != other.segments[i]) return false;
    return true;
  }

  auto operator<=>(const TreeNumber&) const = default;
};

struct MeshDescriptor {
  std::string ui;
  std::string name;
  std::vector<TreeNumber> tree_numbers;  // sorted, unique
};

struct ParseStats {
  uint64_t descriptors = 0;
  uint64_t skipped_no_tree_numbers = 0;
};

class MeshHierarchy {
 public:
  // Throws on duplicate ui or duplicate tree number; a descriptor without
  // tree numbers is rejected here (parsers count and skip those instead).
  void add(MeshDescriptor d) {
    if (d.ui.empty()) throw DataError("descriptor with empty ui");
    if (d.tree_numbers.empty())
      throw DataError("descriptor '" + d.ui + "' has no tree numbers");
    if (descriptors_.count(d.ui))
      throw DataError("duplicate descriptor ui '" + d.ui + "'");
    std::sort(d.tree_numbers.begin(), d.tree_numbers.end());
    d.tree_numbers.erase(std::unique(d.tree_numbers.begin(), d.tree_numbers.end()),
                         d.tree_numbers.end());
    for (const TreeNumber& t : d.tree_numbers) {
      const std::string key = t.str();
      auto [it, inserted] = tree_index_.emplace(key, d.ui);
      if (!inserted)
        throw DataError("tree number '" + key + "' assigned to both '" + it->second +
                        "' and '" + d.ui + "'");
    }
    descriptors_.emplace(d.ui, std::move(d));
  }

  size_t size() const { return descriptors_.size(); }
  bool contains(const std::string& ui) const { return descriptors_.count(ui) != 0; }

  const MeshDescriptor& descriptor(const std::string& ui) const {
    auto it = descriptors_.find(ui);
    if (it == descriptors_.end()) throw LookupError("unknown descriptor ui '" + ui + "'");
    return it->second;
  }

  // Minimum segment count over the descriptor's tree numbers.
  size_t depth(const std::string& ui) const {
    const MeshDescriptor& d = descriptor(ui);
    size_t best = d.tree_numbers.front().depth();
    for (const TreeNumber& t : d.tree_numbers) best = std::min(best, t.depth());
    return best;
  }

  // Descriptors reached by strict segment prefixes of any tree number of ui.
  // Prefixes with no registered descriptor are skipped; never contains ui.
  std::set<std::string> ancestors(const std::string& ui) const {
    const MeshDescriptor& d = descriptor(ui);
    std::set<std::string> out;
    for (const TreeNumber& t : d.tree_numbers) {
      std::string prefix;
      for (size_t i = 0; i + 1 < t.segments.size(); ++i) {
        if (i > 0) prefix += '.';
        prefix += t.segments[i];
        auto it = tree_index_.find(prefix);
        if (it != tree_index_.end() && it->second != ui) out.insert(it->second);
      }
    }
    return out;
  }

  // The input set plus the positional ancestors of each member. Ancestry
  // follows each descriptor's own tree numbers, so a cross-listed ancestor
  // does not drag in its other placements.
  std::set<std::string> expand(const std::set<std::string>& labels) const {
    std::set<std::string> out;
    for (const std::string& ui : labels) {
      descriptor(ui);  // existence check
      out.insert(ui);
      auto anc = ancestors(ui);
      out.insert(anc.begin(), anc.end());
    }
    return out;
  }

  std::set<char> branch_roots() const {
    std::set<char> out;
    for (const auto& [ui, d] : descriptors_)
      for (const TreeNumber& t : d.tree_numbers) out.insert(t.branch());
    return out;
  }

  const std::map<std::string, MeshDescriptor>& descriptors() const { return descriptors_; }
  const std::map<std::string, std::string>& tree_index() const { return tree_index_; }

  const ParseStats& stats() const { return stats_; }
  void set_stats(ParseStats s) { stats_ = s; }

  friend bool operator==(const MeshHierarchy& a, const MeshHierarchy& b) {
    if (a.descriptors_.size() != b.descriptors_.size()) return false;
    auto ia = a.descriptors_.begin();
    auto ib = b.descriptors_.begin();
    for (; ia != a.descriptors_.end(); ++ia, ++ib) {
      if (ia->first != ib->first || ia->second.name != ib->second.name ||
          ia->second.tree_numbers != ib->second.tree_numbers)
        return false;
    }
    return true;
  }

 private:
  std::map<std::string, MeshDescriptor> descriptors_;
  std::map<std::string, std::string> tree_index_;
  ParseStats stats_;
};

// TSV: one descriptor per line, `ui<TAB>name<TAB>tree1;tree2;...`,
// '#'-prefixed comment lines and blank lines allowed.
inline MeshHierarchy parse_descriptors_tsv(std::istream& in) {
  MeshHierarchy h;
  ParseStats stats;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::vector<std::string> fields = split(line, '\t');
    if (fields.size() != 3)
      throw ParseError("line " + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                       std::to_string(fields.size()));
    MeshDescriptor d;
    d.ui = trim(fields[0]);
    d.name = trim(fields[1]);
    if (d.ui.empty())
      throw ParseError("line " + std::to_string(line_no) + ": empty descriptor ui");
    const std::string trees = trim(fields[2]);
    if (trees.empty()) {
      ++stats.skipped_no_tree_numbers;
      continue;
    }
    try {
      for (const std::string& t : split(trees, ';')) {
        if (trim(t).empty()) continue;
        d.tree_numbers.push_back(TreeNumber::parse(t));
      }
      if (d.tree_numbers.empty()) {
        ++stats.skipped_no_tree_numbers;
        continue;
      }
      h.add(std::move(d));
    } catch (const DataError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    ++stats.descriptors;
  }
  h.set_stats(stats);
  return h;
}

inline void write_descriptors_tsv(std::ostream& out, const MeshHierarchy& h) {
  for (const auto& [ui, desc] : h.descriptors()) {
    out << desc.ui << '\t' << desc.name << '\t';
    for (size_t i = 0; i < desc.tree_numbers.size(); ++i) {
      if (i > 0) out << ';';
      out << desc.tree_numbers[i].str();
    }
    out << '\n';
  }
  if (!out) throw DataError("descriptor write failed");
}

}  // namespace hicl
