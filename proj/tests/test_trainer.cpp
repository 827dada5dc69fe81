#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "hicl/synthetic.hpp"
#include "hicl/trainer.hpp"

using namespace hicl;

namespace {

struct TrainFixture {
  MeshHierarchy hierarchy;
  Corpus corpus;
  TrainConfig cfg;
};

TrainFixture make_fixture(uint32_t n_docs = 40, uint64_t seed = 7) {
  TrainFixture f;
  SyntheticHierarchyConfig hcfg;
  hcfg.descriptors = 80;
  hcfg.seed = seed;
  f.hierarchy = synthetic_hierarchy(hcfg);
  SyntheticCorpusConfig ccfg;
  ccfg.n_docs = n_docs;
  ccfg.clusters = 6;
  ccfg.filler_tokens = 20;
  ccfg.noise_tokens = 6;
  ccfg.seed = seed + 1;
  f.corpus = synthetic_corpus(f.hierarchy, ccfg);

  f.cfg.epochs = 2;
  f.cfg.validation_fraction = 0.15;
  f.cfg.seed = 42;
  f.cfg.optimizer.learning_rate = 1e-2;
  f.cfg.mining.batch_size = 16;
  f.cfg.mining.negatives_per_anchor = 4;
  f.cfg.encoder.vocab_buckets = 512;
  f.cfg.encoder.hidden_dim = 32;
  f.cfg.encoder.out_dim = 16;
  f.cfg.encoder.lora_rank = 4;
  f.cfg.encoder.seed = 1234;
  return f;
}

bool same_params(const EncoderParams& a, const EncoderParams& b) {
  return a.token_table == b.token_table && a.projection == b.projection &&
         a.lora_down == b.lora_down && a.lora_up == b.lora_up;
}

std::set<std::pair<uint32_t, uint32_t>> positive_keys(const PairSet& p) {
  std::set<std::pair<uint32_t, uint32_t>> out;
  for (const ScoredPair& sp : p.positives) out.insert({sp.i, sp.j});
  return out;
}

}  // namespace

TEST_CASE("corpus validation rejects empty and duplicate documents") {
  Corpus empty;
  CHECK_THROWS_AS(empty.validate(), DataError);
  Corpus nameless;
  nameless.docs.push_back({"", "text", {}});
  CHECK_THROWS_AS(nameless.validate(), DataError);
  Corpus dup;
  dup.docs.push_back({"d1", "a", {"D000001"}});
  dup.docs.push_back({"d1", "b", {}});
  CHECK_THROWS_AS(dup.validate(), DataError);
  Corpus ok;
  ok.docs.push_back({"d1", "a", {"D000001"}});
  ok.docs.push_back({"d2", "b", {"D000002"}});
  CHECK_NOTHROW(ok.validate());
  const auto ann = ok.annotations();
  REQUIRE(ann.size() == 2);
  CHECK(ann[0] == std::set<std::string>{"D000001"});
}

TEST_CASE("train config validation covers every knob") {
  TrainFixture f = make_fixture();
  CHECK_NOTHROW(f.cfg.validate());
  TrainConfig bad = f.cfg;
  bad.validation_fraction = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = f.cfg;
  bad.validation_fraction = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = f.cfg;
  bad.mining.beta = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = f.cfg;
  bad.mining.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = f.cfg;
  bad.mining.negatives_per_anchor = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = f.cfg;
  bad.optimizer.learning_rate = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("pair split partitions deterministically by pair identity") {
  const TrainFixture f = make_fixture(50, 11);
  const PreparedData data = prepare(f.corpus, f.hierarchy, f.cfg);
  const PairSet& all = data.all_pairs;

  const PairSplit s1 = split_pairs(all, 42, 0.3);
  const PairSplit s2 = split_pairs(all, 42, 0.3);
  CHECK(positive_keys(s1.train) == positive_keys(s2.train));
  CHECK(s1.validation.negatives == s2.validation.negatives);

  CHECK(s1.train.positives.size() + s1.validation.positives.size() == all.positives.size());
  CHECK(s1.train.negatives.size() + s1.validation.negatives.size() == all.negatives.size());
  CHECK(!s1.validation.positives.empty());
  CHECK(!s1.train.positives.empty());
  std::set<std::pair<uint32_t, uint32_t>> train_keys = positive_keys(s1.train);
  for (const auto& key : positive_keys(s1.validation)) CHECK(train_keys.count(key) == 0);

  // membership depends on the pair, not on mining order
  PairSet shuffled = all;
  std::reverse(shuffled.positives.begin(), shuffled.positives.end());
  std::reverse(shuffled.negatives.begin(), shuffled.negatives.end());
  const PairSplit s3 = split_pairs(shuffled, 42, 0.3);
  CHECK(positive_keys(s3.validation) == positive_keys(s1.validation));

  const PairSplit s4 = split_pairs(all, 43, 0.3);
  CHECK(positive_keys(s4.validation) != positive_keys(s1.validation));

  const PairSplit none = split_pairs(all, 42, 0.0);
  CHECK(none.validation.positives.empty());
  CHECK(none.validation.negatives.empty());
  CHECK(none.train.positives.size() == all.positives.size());
}

TEST_CASE("prepared data reflects the pipeline flags") {
  const TrainFixture f = make_fixture(30, 19);
  const PreparedData expanded = prepare(f.corpus, f.hierarchy, f.cfg);
  TrainConfig raw_cfg = f.cfg;
  raw_cfg.flags.ancestor_expansion = false;
  raw_cfg.flags.depth_weighting = false;
  const PreparedData raw = prepare(f.corpus, f.hierarchy, raw_cfg);

  CHECK(expanded.tokens.size() == f.corpus.docs.size());
  CHECK(expanded.index.size() > raw.index.size());
  for (double w : raw.weights) CHECK(w == 1.0);
  bool any_weight_above_one = false;
  for (double w : expanded.weights) any_weight_above_one |= (w > 1.0);
  CHECK(any_weight_above_one);
  CHECK(expanded.all_pairs.total_pairs() ==
        static_cast<uint64_t>(f.corpus.docs.size()) * (f.corpus.docs.size() - 1) / 2);
}

TEST_CASE("validation macro batch gathers every eligible anchor once") {
  PairSet val;
  val.n_docs = 6;
  val.positives = {{0, 1, 0.9}, {2, 3, 0.8}};
  val.negatives = {{0, 4}, {1, 5}};
  MiningConfig mining;
  mining.negatives_per_anchor = 2;
  const auto batch = validation_macro_batch(val, mining, 42);
  REQUIRE(batch.has_value());
  REQUIRE(batch->anchors.size() == 2);  // docs 0 and 1; 2..5 lack one side
  std::set<uint32_t> anchor_docs;
  for (const BatchAnchor& a : batch->anchors) anchor_docs.insert(a.doc);
  CHECK(anchor_docs == std::set<uint32_t>{0, 1});

  const auto again = validation_macro_batch(val, mining, 42);
  REQUIRE(again.has_value());
  CHECK(again->anchors.size() == batch->anchors.size());
  for (size_t i = 0; i < batch->anchors.size(); ++i)
    CHECK(again->anchors[i].doc == batch->anchors[i].doc);
}

TEST_CASE("a validation split with no mixed anchor yields no batch") {
  PairSet val;
  val.n_docs = 4;
  val.positives = {{0, 1, 0.9}};
  val.negatives = {{2, 3}};
  CHECK_FALSE(validation_macro_batch(val, MiningConfig{}, 1).has_value());
}

TEST_CASE("zero epochs return the untouched initialization") {
  TrainFixture f = make_fixture(30, 23);
  f.cfg.epochs = 0;
  const TrainResult r = train(f.corpus, f.hierarchy, f.cfg);
  const EncoderParams fresh = init_params(f.cfg.encoder);
  CHECK(same_params(r.best_params, fresh));
  CHECK(same_params(r.final_params, fresh));
  CHECK(r.records.empty());
  CHECK_FALSE(r.aborted);
  CHECK_FALSE(r.has_best_epoch);
}

TEST_CASE("training is bitwise deterministic for a fixed config") {
  const TrainFixture f = make_fixture(40, 29);
  const TrainResult a = train(f.corpus, f.hierarchy, f.cfg);
  const TrainResult b = train(f.corpus, f.hierarchy, f.cfg);
  CHECK(same_params(a.final_params, b.final_params));
  CHECK(same_params(a.best_params, b.best_params));
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].train_loss == b.records[i].train_loss);
    CHECK(a.records[i].val_loss == b.records[i].val_loss);
    CHECK(a.records[i].mse_pairs == b.records[i].mse_pairs);
  }

  TrainConfig reseeded = f.cfg;
  reseeded.seed = 43;
  const TrainResult c = train(f.corpus, f.hierarchy, reseeded);
  CHECK_FALSE(same_params(a.final_params, c.final_params));
}

TEST_CASE("supplying prepared data is equivalent to preparing internally") {
  const TrainFixture f = make_fixture(35, 31);
  const PreparedData data = prepare(f.corpus, f.hierarchy, f.cfg);
  const TrainResult a = train(f.corpus, f.hierarchy, f.cfg, &data);
  const TrainResult b = train(f.corpus, f.hierarchy, f.cfg);
  CHECK(same_params(a.final_params, b.final_params));
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i)
    CHECK(a.records[i].train_loss == b.records[i].train_loss);
  CHECK(a.train_positive_pairs == data.train_pairs.positives.size());
  CHECK(a.val_positive_pairs == data.val_pairs.positives.size());
  CHECK(a.train_positive_pairs + a.val_positive_pairs == data.all_pairs.positives.size());
  CHECK(a.excluded_pairs == data.all_pairs.excluded_count);
}

TEST_CASE("epoch records track validation and the best checkpoint") {
  TrainFixture f = make_fixture(45, 37);
  f.cfg.epochs = 3;
  const TrainResult r = train(f.corpus, f.hierarchy, f.cfg);
  REQUIRE_FALSE(r.aborted);
  REQUIRE(r.records.size() == 3);
  double best = std::numeric_limits<double>::infinity();
  uint32_t best_epoch = 0;
  for (const EpochRecord& rec : r.records) {
    REQUIRE(rec.has_val);
    REQUIRE(std::isfinite(rec.val_loss));
    REQUIRE(std::isfinite(rec.train_loss));
    CHECK(rec.batches > 0);
    CHECK(rec.mse_pairs > 0);
    if (rec.val_loss < best) {
      best = rec.val_loss;
      best_epoch = rec.epoch;
    }
  }
  REQUIRE(r.has_best_epoch);
  CHECK(r.best_epoch == best_epoch);
  CHECK(r.best_val_loss == best);
}

TEST_CASE("without a validation split the best checkpoint follows train loss") {
  TrainFixture f = make_fixture(30, 41);
  f.cfg.validation_fraction = 0.0;
  f.cfg.epochs = 2;
  const TrainResult r = train(f.corpus, f.hierarchy, f.cfg);
  REQUIRE_FALSE(r.aborted);
  REQUIRE(r.records.size() == 2);
  for (const EpochRecord& rec : r.records) {
    CHECK_FALSE(rec.has_val);
    CHECK(std::isnan(rec.val_loss));
  }
  CHECK(r.has_best_epoch);
  CHECK(std::isnan(r.best_val_loss));
}

TEST_CASE("a numeric blowup aborts training but keeps the best checkpoint") {
  TrainFixture f = make_fixture(40, 43);
  f.cfg.epochs = 6;
  f.cfg.optimizer.learning_rate = 1e50;
  f.cfg.optimizer.weight_decay = 1e50;
  const TrainResult r = train(f.corpus, f.hierarchy, f.cfg);
  CHECK(r.aborted);
  CHECK_FALSE(r.abort_reason.empty());
  CHECK(r.records.size() < f.cfg.epochs);
  CHECK(r.best_params.token_table.all_finite());
  CHECK(r.best_params.projection.all_finite());
  CHECK(r.best_params.lora_down.all_finite());
  CHECK(r.best_params.lora_up.all_finite());
}

TEST_CASE("alignment probe needs enough positives and reports both signals") {
  const TrainFixture f = make_fixture(40, 47);
  const PreparedData data = prepare(f.corpus, f.hierarchy, f.cfg);
  const TrainResult r = train(f.corpus, f.hierarchy, f.cfg, &data);
  const AlignmentReport rep = evaluate_alignment(r.best_params, data.tokens, data.val_pairs);
  CHECK(rep.positives_evaluated == data.val_pairs.positives.size());
  CHECK(rep.negatives_evaluated == data.val_pairs.negatives.size());
  CHECK(rep.spearman_alignment >= -1.0);
  CHECK(rep.spearman_alignment <= 1.0);
  CHECK(std::isfinite(rep.mean_negative_similarity));

  PairSet tiny;
  tiny.n_docs = 2;
  tiny.positives = {{0, 1, 0.9}};
  CHECK_THROWS_AS(evaluate_alignment(r.best_params, data.tokens, tiny), DataError);
}

TEST_CASE("the ablation suite trains all six variants against one reference") {
  TrainFixture f = make_fixture(60, 53);
  f.cfg.epochs = 1;
  const auto rows = run_ablation_suite(f.corpus, f.hierarchy, f.cfg);
  REQUIRE(rows.size() == 6);
  const std::vector<std::string> names = {
      "full",           "no_ancestor_expansion",    "uniform_depth_weights",
      "no_similarity_regression", "no_contrastive", "full_finetune"};
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].name == names[i]);
    CHECK_FALSE(rows[i].aborted);
    CHECK(std::isfinite(rows[i].alignment.spearman_alignment));
    CHECK(std::isfinite(rows[i].alignment.mean_negative_similarity));
    CHECK(rows[i].alignment.positives_evaluated > 0);
  }
  // the reference holdout is shared, so every variant scored the same pairs
  for (size_t i = 1; i < rows.size(); ++i)
    CHECK(rows[i].alignment.positives_evaluated == rows[0].alignment.positives_evaluated);
}
