#pragma once

// Graded-relevance retrieval evaluation: brute-force ranking over a document
// matrix, nDCG@k and Recall@k against integer-graded judgments, plus the
// Spearman correlation used for alignment probes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hicl/common.hpp"
#include "hicl/matrix.hpp"

namespace hicl {

// qrels[query][doc] = grade. Grade 0 rows are kept; they mark judged
// non-relevant documents.
using Qrels = std::map<std::string, std::map<std::string, int>>;

struct RankedDoc {
  std::string doc_id;
  uint32_t rank = 0;  // 1-based
  double score = 0.0;
};

using RetrievalRun = std::map<std::string, std::vector<RankedDoc>>;

// Scores every candidate against the query embedding and returns the top k
// by descending score, ties broken by ascending document id.
inline std::vector<RankedDoc> retrieve(std::span<const double> query,
                                       const std::vector<std::vector<double>>& candidates,
                                       const std::vector<std::string>& doc_ids, uint32_t k) {
  if (candidates.size() != doc_ids.size())
    throw DataError("candidate matrix and document id list disagree: " +
                    std::to_string(candidates.size()) + " vs " + std::to_string(doc_ids.size()));
  if (k == 0) throw ConfigError("retrieval depth k must be positive");
  std::vector<size_t> order(candidates.size());
  std::vector<double> scores(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].size() != query.size())
      throw DataError("candidate " + doc_ids[i] + " has dimension " +
                      std::to_string(candidates[i].size()) + ", query has " +
                      std::to_string(query.size()));
    order[i] = i;
    scores[i] = dot(query, candidates[i]);
    if (!std::isfinite(scores[i]))
      throw NumericError("non-finite retrieval score for document " + doc_ids[i]);
  }
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return doc_ids[a] < doc_ids[b];
  });
  const size_t depth = std::min<size_t>(k, order.size());
  std::vector<RankedDoc> out;
  out.reserve(depth);
  for (size_t r = 0; r < depth; ++r)
    out.push_back({doc_ids[order[r]], static_cast<uint32_t>(r + 1), scores[order[r]]});
  return out;
}

enum class GainScheme { linear, exponential };

namespace detail {

inline double gain(int grade, GainScheme scheme) {
  if (scheme == GainScheme::linear) return static_cast<double>(grade);
  return std::pow(2.0, static_cast<double>(grade)) - 1.0;
}

inline double dcg(std::span<const int> grades, GainScheme scheme) {
  double total = 0.0;
  for (size_t r = 0; r < grades.size(); ++r)
    total += gain(grades[r], scheme) / std::log2(static_cast<double>(r) + 2.0);
  return total;
}

}  // namespace detail

// nDCG@k for one ranking, given the grades of the ranked documents in rank
// order (unjudged documents grade 0) and the full grade multiset of the
// query's judgments for the ideal ranking. Returns nullopt-like signal via
// has_gain=false when the query has no positive grades.
struct NdcgResult {
  double value = 0.0;
  bool has_gain = false;
};

inline NdcgResult ndcg_at_k(std::span<const int> ranked_grades, std::vector<int> all_grades,
                            uint32_t k, GainScheme scheme = GainScheme::linear) {
  std::sort(all_grades.begin(), all_grades.end(), std::greater<int>());
  if (all_grades.size() > k) all_grades.resize(k);
  const double ideal = detail::dcg(all_grades, scheme);
  if (ideal <= 0.0) return {0.0, false};
  const size_t depth = std::min<size_t>(k, ranked_grades.size());
  const double actual = detail::dcg(ranked_grades.subspan(0, depth), scheme);
  return {actual / ideal, true};
}

// Mean nDCG@k over a run; queries whose judgments carry no positive grade
// are excluded from the mean. Queries present in qrels but absent from the
// run score zero (they were judged but never answered).
struct MetricSummary {
  double value = 0.0;
  uint64_t queries_scored = 0;
  uint64_t queries_excluded = 0;
};

inline MetricSummary mean_ndcg_at_k(const RetrievalRun& run, const Qrels& qrels, uint32_t k,
                                    GainScheme scheme = GainScheme::linear) {
  MetricSummary summary;
  double total = 0.0;
  for (const auto& [query, judgments] : qrels) {
    std::vector<int> all_grades;
    all_grades.reserve(judgments.size());
    for (const auto& [doc, grade] : judgments) all_grades.push_back(grade);
    std::vector<int> ranked_grades;
    if (auto it = run.find(query); it != run.end()) {
      ranked_grades.reserve(it->second.size());
      for (const RankedDoc& rd : it->second) {
        auto jt = judgments.find(rd.doc_id);
        ranked_grades.push_back(jt == judgments.end() ? 0 : jt->second);
      }
    }
    const NdcgResult r = ndcg_at_k(ranked_grades, std::move(all_grades), k, scheme);
    if (!r.has_gain) {
      ++summary.queries_excluded;
      continue;
    }
    total += r.value;
    ++summary.queries_scored;
  }
  if (summary.queries_scored > 0) summary.value = total / static_cast<double>(summary.queries_scored);
  return summary;
}

// Recall@k with positives defined as grade > 0. Queries with no positives
// are excluded.
inline MetricSummary recall_at_k(const RetrievalRun& run, const Qrels& qrels, uint32_t k) {
  MetricSummary summary;
  double total = 0.0;
  for (const auto& [query, judgments] : qrels) {
    uint64_t n_positive = 0;
    for (const auto& [doc, grade] : judgments)
      if (grade > 0) ++n_positive;
    if (n_positive == 0) {
      ++summary.queries_excluded;
      continue;
    }
    uint64_t hit = 0;
    if (auto it = run.find(query); it != run.end()) {
      for (const RankedDoc& rd : it->second) {
        if (rd.rank > k) continue;
        auto jt = judgments.find(rd.doc_id);
        if (jt != judgments.end() && jt->second > 0) ++hit;
      }
    }
    total += static_cast<double>(hit) / static_cast<double>(n_positive);
    ++summary.queries_scored;
  }
  if (summary.queries_scored > 0) summary.value = total / static_cast<double>(summary.queries_scored);
  return summary;
}

namespace detail {

// Average ranks, ties sharing the mean of their covered positions (1-based).
inline std::vector<double> average_ranks(std::span<const double> values) {
  const size_t n = values.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

// Spearman rank correlation via Pearson on average ranks. A constant gold
// vector has no ranking to agree with and is rejected; a constant prediction
// vector scores 0 (no rank information recovered).
inline double spearman(std::span<const double> predicted, std::span<const double> gold) {
  if (predicted.size() != gold.size())
    throw DataError("spearman inputs disagree in length: " + std::to_string(predicted.size()) +
                    " vs " + std::to_string(gold.size()));
  if (predicted.size() < 2) throw DataError("spearman needs at least two observations");
  for (double v : gold)
    if (!std::isfinite(v)) throw NumericError("non-finite gold value in spearman");
  for (double v : predicted)
    if (!std::isfinite(v)) throw NumericError("non-finite predicted value in spearman");
  const bool gold_constant =
      std::all_of(gold.begin(), gold.end(), [&](double v) { return v == gold.front(); });
  if (gold_constant) throw DataError("gold values are constant; rank correlation is undefined");
  const std::vector<double> rp = detail::average_ranks(predicted);
  const std::vector<double> rg = detail::average_ranks(gold);
  return detail::pearson(rp, rg);
}

}  // namespace hicl
