#pragma once

// End-to-end training pipeline: corpus -> concept index -> mined pairs ->
// train/validation split -> per-epoch batch streams -> AdamW updates, with
// best-validation checkpointing and an ablation harness that scores flag
// variants against one fixed reference pair split.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hicl/label_space.hpp"
#include "hicl/metrics.hpp"
#include "hicl/optimizer.hpp"

namespace hicl {

struct Document {
  std::string id;
  std::string text;
  std::set<std::string> mesh;
};

struct Corpus {
  std::vector<Document> docs;

  void validate() const {
    if (docs.empty()) throw DataError("corpus is empty");
    std::set<std::string> seen;
    for (const Document& d : docs) {
      if (d.id.empty()) throw DataError("corpus document with empty id");
      if (!seen.insert(d.id).second) throw DataError("duplicate document id '" + d.id + "'");
    }
  }

  std::vector<std::set<std::string>> annotations() const {
    std::vector<std::set<std::string>> out;
    out.reserve(docs.size());
    for (const Document& d : docs) out.push_back(d.mesh);
    return out;
  }
};

struct PipelineFlags {
  bool ancestor_expansion = true;
  bool depth_weighting = true;
};

struct TrainConfig {
  uint32_t epochs = 5;
  double validation_fraction = 0.1;
  uint64_t seed = 42;
  AdamWConfig optimizer;
  MiningConfig mining;
  LossConfig loss;
  EncoderConfig encoder;
  PipelineFlags flags;

  void validate() const {
    if (validation_fraction < 0.0 || validation_fraction >= 1.0)
      throw ConfigError("validation_fraction must be in [0, 1)");
    optimizer.validate();
    encoder.validate();
    if (mining.beta < 0.0 || mining.beta >= 1.0)
      throw ConfigError("mining beta must be in [0, 1)");
    if (mining.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (mining.negatives_per_anchor == 0)
      throw ConfigError("negatives_per_anchor must be positive");
  }
};

namespace detail {

// Stable pair-level split: the same (seed, i, j) always lands on the same
// side, independent of mining order or epoch count.
inline bool pair_in_validation(uint64_t seed, uint32_t i, uint32_t j, double fraction) {
  const uint64_t key = (static_cast<uint64_t>(i) << 32) | static_cast<uint64_t>(j);
  const uint64_t h = splitmix64(seed ^ splitmix64(key));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return u < fraction;
}

}  // namespace detail

struct PairSplit {
  PairSet train;
  PairSet validation;
};

inline PairSplit split_pairs(const PairSet& all, uint64_t seed, double fraction) {
  PairSplit split;
  split.train.n_docs = all.n_docs;
  split.validation.n_docs = all.n_docs;
  const uint64_t split_seed = mix_seed(seed, 0x53504c49u);  // distinct stream from batching
  for (const ScoredPair& p : all.positives) {
    auto& side = detail::pair_in_validation(split_seed, p.i, p.j, fraction) ? split.validation
                                                                            : split.train;
    side.positives.push_back(p);
  }
  for (const DocPair& p : all.negatives) {
    auto& side = detail::pair_in_validation(split_seed, p.i, p.j, fraction) ? split.validation
                                                                            : split.train;
    side.negatives.push_back(p);
  }
  return split;
}

// Everything derived from the corpus before any parameter update.
struct PreparedData {
  ConceptIndex index;
  WeightVector weights;
  std::vector<LabelVector> vectors;
  PairSet all_pairs;
  PairSet train_pairs;
  PairSet val_pairs;
  std::vector<std::vector<uint32_t>> tokens;
};

inline PreparedData prepare(const Corpus& corpus, const MeshHierarchy& hierarchy,
                            const TrainConfig& cfg) {
  cfg.validate();
  corpus.validate();
  const auto annotations = corpus.annotations();
  PreparedData data{
      .index = ConceptIndex::build(annotations, hierarchy, cfg.flags.ancestor_expansion),
      .weights = {},
      .vectors = {},
      .all_pairs = {},
      .train_pairs = {},
      .val_pairs = {},
      .tokens = {},
  };
  data.weights = depth_weights(data.index, hierarchy, cfg.flags.depth_weighting);
  data.vectors.reserve(annotations.size());
  for (const auto& mesh : annotations)
    data.vectors.push_back(vectorize(mesh, data.index, hierarchy, cfg.flags.ancestor_expansion));
  data.all_pairs = mine_pairs(data.vectors, data.weights, cfg.mining);
  PairSplit split = split_pairs(data.all_pairs, cfg.seed, cfg.validation_fraction);
  data.train_pairs = std::move(split.train);
  data.val_pairs = std::move(split.validation);
  data.tokens.reserve(corpus.docs.size());
  for (const Document& d : corpus.docs) data.tokens.push_back(tokenize(d.text, cfg.encoder));
  return data;
}

// One validation batch holding every eligible validation anchor, built once
// with its own seed so the measured loss is comparable across epochs.
inline std::optional<PairBatch> validation_macro_batch(const PairSet& val_pairs,
                                                       const MiningConfig& mining,
                                                       uint64_t seed) {
  std::set<uint32_t> with_pos, with_neg;
  for (const ScoredPair& p : val_pairs.positives) {
    with_pos.insert(p.i);
    with_pos.insert(p.j);
  }
  for (const DocPair& p : val_pairs.negatives) {
    with_neg.insert(p.i);
    with_neg.insert(p.j);
  }
  uint32_t eligible = 0;
  for (uint32_t doc : with_pos)
    if (with_neg.count(doc) > 0) ++eligible;
  if (eligible == 0) return std::nullopt;
  MiningConfig macro = mining;
  macro.batch_size = eligible;
  macro.seed = mix_seed(seed, 0x56414c42u);
  const std::vector<PairBatch> batches = sample_batches(val_pairs, macro);
  return batches.front();
}

struct EpochRecord {
  uint32_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  bool has_val = false;
  uint64_t batches = 0;
  uint64_t mse_pairs = 0;
  uint64_t con_anchors = 0;
  uint64_t skipped_anchors = 0;
};

struct TrainResult {
  EncoderParams best_params;
  EncoderParams final_params;
  std::vector<EpochRecord> records;
  bool aborted = false;
  std::string abort_reason;
  bool has_best_epoch = false;
  uint32_t best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::quiet_NaN();
  uint64_t train_positive_pairs = 0;
  uint64_t train_negative_pairs = 0;
  uint64_t val_positive_pairs = 0;
  uint64_t val_negative_pairs = 0;
  uint64_t excluded_pairs = 0;
};

inline TrainResult train(const Corpus& corpus, const MeshHierarchy& hierarchy,
                         const TrainConfig& cfg, const PreparedData* prepared = nullptr) {
  PreparedData local;
  if (prepared == nullptr) {
    local = prepare(corpus, hierarchy, cfg);
    prepared = &local;
  }
  const PreparedData& data = *prepared;

  TrainResult result;
  result.train_positive_pairs = data.train_pairs.positives.size();
  result.train_negative_pairs = data.train_pairs.negatives.size();
  result.val_positive_pairs = data.val_pairs.positives.size();
  result.val_negative_pairs = data.val_pairs.negatives.size();
  result.excluded_pairs = data.all_pairs.excluded_count;

  EncoderParams params = init_params(cfg.encoder);
  result.best_params = params;
  result.final_params = params;
  if (cfg.epochs == 0) return result;

  const std::optional<PairBatch> val_batch =
      validation_macro_batch(data.val_pairs, cfg.mining, cfg.seed);
  auto validation_loss = [&](const EncoderParams& p) {
    const BatchForward fwd = BatchForward::run(*val_batch, data.tokens, p);
    return total_loss(*val_batch, fwd, cfg.loss).total;
  };

  AdamW optimizer(cfg.optimizer, params);
  double best_score = std::numeric_limits<double>::infinity();
  for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    try {
      MiningConfig epoch_cfg = cfg.mining;
      epoch_cfg.seed = mix_seed(mix_seed(cfg.seed, 0x45504f43u), epoch);
      BatchingStats stats;
      const std::vector<PairBatch> batches = sample_batches(data.train_pairs, epoch_cfg, &stats);
      record.skipped_anchors = stats.skipped_anchors;
      double loss_sum = 0.0;
      for (const PairBatch& batch : batches) {
        const BatchForward fwd = BatchForward::run(batch, data.tokens, params);
        const LossReport report = total_loss(batch, fwd, cfg.loss);
        if (!std::isfinite(report.total))
          throw NumericError("non-finite training loss in epoch " + std::to_string(epoch));
        const GradientSet grads = backward(batch, fwd, params, cfg.loss);
        optimizer.step(params, grads);
        loss_sum += report.total;
        record.mse_pairs += report.mse_pairs_used;
        record.con_anchors += report.con_anchors_used;
        ++record.batches;
      }
      record.train_loss = loss_sum / static_cast<double>(record.batches);
      if (val_batch.has_value()) {
        record.val_loss = validation_loss(params);
        if (!std::isfinite(record.val_loss))
          throw NumericError("non-finite validation loss in epoch " + std::to_string(epoch));
        record.has_val = true;
      }
    } catch (const NumericError& e) {
      result.aborted = true;
      result.abort_reason = e.what();
      break;
    }
    const double score = record.has_val ? record.val_loss : record.train_loss;
    if (score < best_score) {
      best_score = score;
      result.best_params = params;
      result.best_epoch = epoch;
      result.has_best_epoch = true;
      if (record.has_val) result.best_val_loss = record.val_loss;
    }
    result.final_params = params;
    result.records.push_back(record);
  }
  return result;
}

struct AlignmentReport {
  double spearman_alignment = 0.0;
  double mean_negative_similarity = 0.0;
  uint64_t positives_evaluated = 0;
  uint64_t negatives_evaluated = 0;
};

// Probe of what the encoder learned: rank agreement between embedding and
// label similarity on positive pairs, and the raw embedding similarity mass
// left on label-disjoint pairs (a collapse indicator when it drifts to 1).
inline AlignmentReport evaluate_alignment(const EncoderParams& params,
                                          const std::vector<std::vector<uint32_t>>& tokens,
                                          const PairSet& pairs) {
  if (pairs.positives.size() < 2)
    throw DataError("alignment probe needs at least two positive pairs, got " +
                    std::to_string(pairs.positives.size()));
  std::map<uint32_t, EmbeddingVector> cache;
  auto embed = [&](uint32_t doc) -> const EmbeddingVector& {
    auto it = cache.find(doc);
    if (it == cache.end()) {
      if (doc >= tokens.size())
        throw DataError("pair references document " + std::to_string(doc) +
                        " outside the tokenized corpus");
      it = cache.emplace(doc, encode_tokens(tokens[doc], params)).first;
    }
    return it->second;
  };

  AlignmentReport report;
  std::vector<double> predicted, gold;
  predicted.reserve(pairs.positives.size());
  gold.reserve(pairs.positives.size());
  for (const ScoredPair& p : pairs.positives) {
    predicted.push_back(embedding_similarity(embed(p.i), embed(p.j)));
    gold.push_back(p.sim);
    ++report.positives_evaluated;
  }
  report.spearman_alignment = spearman(predicted, gold);
  double neg_sum = 0.0;
  for (const DocPair& p : pairs.negatives) {
    neg_sum += embedding_similarity(embed(p.i), embed(p.j));
    ++report.negatives_evaluated;
  }
  if (report.negatives_evaluated > 0)
    report.mean_negative_similarity = neg_sum / static_cast<double>(report.negatives_evaluated);
  return report;
}

struct AblationRow {
  std::string name;
  AlignmentReport alignment;
  double final_train_loss = std::numeric_limits<double>::quiet_NaN();
  double final_val_loss = std::numeric_limits<double>::quiet_NaN();
  bool aborted = false;
};

// Trains the full configuration and five single-change variants with shared
// seeds, then scores every variant on the reference (full configuration)
// held-out pairs so the alignment numbers are comparable: variants that
// change the label space or mining would otherwise grade their own homework.
inline std::vector<AblationRow> run_ablation_suite(const Corpus& corpus,
                                                   const MeshHierarchy& hierarchy,
                                                   const TrainConfig& base) {
  TrainConfig reference = base;
  reference.flags = PipelineFlags{};
  reference.loss.use_mse = true;
  reference.loss.use_con = true;
  reference.encoder.mode = EncoderMode::lora;
  const PreparedData ref_data = prepare(corpus, hierarchy, reference);
  if (ref_data.val_pairs.positives.size() < 2 || ref_data.val_pairs.negatives.empty())
    throw DataError(
        "reference validation split too small for the ablation probe; "
        "grow the corpus or validation_fraction");

  struct Variant {
    std::string name;
    TrainConfig cfg;
  };
  std::vector<Variant> variants;
  variants.push_back({"full", reference});
  {
    TrainConfig c = reference;
    c.flags.ancestor_expansion = false;
    variants.push_back({"no_ancestor_expansion", c});
  }
  {
    TrainConfig c = reference;
    c.flags.depth_weighting = false;
    variants.push_back({"uniform_depth_weights", c});
  }
  {
    TrainConfig c = reference;
    c.loss.use_mse = false;
    variants.push_back({"no_similarity_regression", c});
  }
  {
    TrainConfig c = reference;
    c.loss.use_con = false;
    variants.push_back({"no_contrastive", c});
  }
  {
    TrainConfig c = reference;
    c.encoder.mode = EncoderMode::full;
    variants.push_back({"full_finetune", c});
  }

  std::vector<AblationRow> rows;
  rows.reserve(variants.size());
  for (const Variant& v : variants) {
    // Loss-term and encoder-mode variants leave the label space, mining, and
    // split untouched, so they can reuse the reference preparation.
    const bool shares_ref_data =
        v.cfg.flags.ancestor_expansion == reference.flags.ancestor_expansion &&
        v.cfg.flags.depth_weighting == reference.flags.depth_weighting;
    const TrainResult result =
        train(corpus, hierarchy, v.cfg, shares_ref_data ? &ref_data : nullptr);
    AblationRow row;
    row.name = v.name;
    row.aborted = result.aborted;
    if (!result.records.empty()) {
      row.final_train_loss = result.records.back().train_loss;
      if (result.records.back().has_val) row.final_val_loss = result.records.back().val_loss;
    }
    row.alignment = evaluate_alignment(result.best_params, ref_data.tokens, ref_data.val_pairs);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace hicl
