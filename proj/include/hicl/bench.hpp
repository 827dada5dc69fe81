#pragma once

// Timing harness over a seeded synthetic workload: hierarchy construction,
// corpus preparation (vectorize, mine, split, tokenize), one training epoch,
// and raw encode throughput. Peak memory comes from the kernel's high-water
// mark for the process, when the platform exposes it.

#include <chrono>
#include <fstream>
#include <string>

#include "hicl/synthetic.hpp"

namespace hicl {

struct BenchConfig {
  SyntheticHierarchyConfig hierarchy;
  SyntheticCorpusConfig corpus;
  TrainConfig train;

  BenchConfig() {
    hierarchy.descriptors = 400;
    corpus.n_docs = 200;
    train.epochs = 1;
  }
};

struct BenchReport {
  uint64_t descriptors = 0;
  uint64_t docs = 0;
  uint64_t positive_pairs = 0;
  uint64_t negative_pairs = 0;
  double hierarchy_seconds = 0.0;
  double prepare_seconds = 0.0;
  double train_seconds = 0.0;
  double encode_seconds = 0.0;
  double encode_docs_per_second = 0.0;
  uint64_t peak_rss_kb = 0;
};

inline uint64_t peak_rss_kb() {
  std::ifstream status("/proc/self/status");
  std::string line;
  while (std::getline(status, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      uint64_t kb = 0;
      for (char c : line)
        if (c >= '0' && c <= '9') kb = kb * 10 + static_cast<uint64_t>(c - '0');
      return kb;
    }
  }
  return 0;
}

inline BenchReport run_bench(const BenchConfig& cfg) {
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
  };

  BenchReport report;
  const auto t0 = clock::now();
  const MeshHierarchy hierarchy = synthetic_hierarchy(cfg.hierarchy);
  const auto t1 = clock::now();
  report.hierarchy_seconds = seconds(t0, t1);
  report.descriptors = hierarchy.size();

  const Corpus corpus = synthetic_corpus(hierarchy, cfg.corpus);
  const auto t2 = clock::now();
  const PreparedData data = prepare(corpus, hierarchy, cfg.train);
  const auto t3 = clock::now();
  report.prepare_seconds = seconds(t2, t3);
  report.docs = corpus.docs.size();
  report.positive_pairs = data.all_pairs.positives.size();
  report.negative_pairs = data.all_pairs.negatives.size();

  const TrainResult result = train(corpus, hierarchy, cfg.train, &data);
  const auto t4 = clock::now();
  report.train_seconds = seconds(t3, t4);

  const EncoderParams& params = result.final_params;
  const auto t5 = clock::now();
  for (const auto& tokens : data.tokens) {
    const EmbeddingVector e = encode_tokens(tokens, params);
    if (e.values.empty()) throw NumericError("benchmark encode produced an empty embedding");
  }
  const auto t6 = clock::now();
  report.encode_seconds = seconds(t5, t6);
  if (report.encode_seconds > 0.0)
    report.encode_docs_per_second = static_cast<double>(report.docs) / report.encode_seconds;
  report.peak_rss_kb = peak_rss_kb();
  return report;
}

}  // namespace hicl
