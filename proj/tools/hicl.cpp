// Command-line workbench over the library: parse hierarchies, train, grade
// retrieval quality, check gradients, sweep the loss grid, run ablations,
// benchmark, and generate synthetic datasets.
//
// Exit codes: 0 success, 1 usage error, 2 malformed data or configuration,
// 3 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hicl/hicl.hpp"

namespace {

std::ifstream open_text_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw hicl::DataError("cannot open '" + path + "' for reading");
  return in;
}

std::ifstream open_binary_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw hicl::DataError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_text_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw hicl::DataError("cannot open '" + path + "' for writing");
  return out;
}

std::ofstream open_binary_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw hicl::DataError("cannot open '" + path + "' for writing");
  return out;
}

hicl::MeshHierarchy load_hierarchy(const std::string& path, const std::string& format) {
  if (format == "cache") {
    auto in = open_binary_in(path);
    return hicl::read_hierarchy_cache(in);
  }
  auto in = open_text_in(path);
  return hicl::parse_descriptors(in, hicl::mesh_format_from_string(format));
}

hicl::Corpus load_corpus(const std::string& path) {
  auto in = open_text_in(path);
  return hicl::read_corpus_jsonl(in);
}

std::vector<hicl::EmbeddingVector> encode_corpus(const hicl::Corpus& corpus,
                                                 const hicl::EncoderParams& params) {
  std::vector<hicl::EmbeddingVector> out;
  out.reserve(corpus.docs.size());
  for (const hicl::Document& d : corpus.docs) out.push_back(hicl::encode(d.text, params));
  return out;
}

// Options shared by every command that assembles a training configuration.
struct PipelineOptions {
  std::string mesh;
  std::string mesh_format = "tsv";
  std::string corpus;
  std::string config_path;

  uint32_t epochs = 5;
  uint64_t seed = 42;
  double validation_fraction = 0.1;
  double learning_rate = 1e-5;
  double weight_decay = 0.0;
  double beta = 0.3;
  double lambda = 0.1;
  uint32_t batch_size = 32;
  uint32_t negatives = 8;
  std::string positive_reduction = "mean";
  uint32_t vocab_buckets = 4096;
  uint32_t hidden_dim = 64;
  uint32_t out_dim = 32;
  uint32_t lora_rank = 4;
  uint64_t encoder_seed = 1234;
  uint32_t max_tokens = 8192;
  bool no_ancestor_expansion = false;
  bool no_depth_weighting = false;
  bool no_mse = false;
  bool no_con = false;
  bool full_finetune = false;

  CLI::App* sub = nullptr;

  void attach(CLI::App* cmd) {
    sub = cmd;
    cmd->add_option("--mesh", mesh, "descriptor file")->required();
    cmd->add_option("--mesh-format", mesh_format, "tsv, xml, or cache")
        ->check(CLI::IsMember({"tsv", "xml", "cache"}));
    cmd->add_option("--corpus", corpus, "corpus JSONL")->required();
    cmd->add_option("--config", config_path, "workbench config JSON");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--seed", seed, "pipeline seed");
    cmd->add_option("--validation-fraction", validation_fraction, "held-out pair fraction");
    cmd->add_option("--lr", learning_rate, "learning rate");
    cmd->add_option("--weight-decay", weight_decay, "decoupled weight decay");
    cmd->add_option("--beta", beta, "positive mining threshold");
    cmd->add_option("--lambda", lambda, "contrastive weight");
    cmd->add_option("--batch-size", batch_size, "anchors per batch");
    cmd->add_option("--negatives", negatives, "sampled negatives per anchor");
    cmd->add_option("--positive-reduction", positive_reduction, "mean or sum")
        ->check(CLI::IsMember({"mean", "sum"}));
    cmd->add_option("--vocab-buckets", vocab_buckets, "token hash buckets");
    cmd->add_option("--hidden-dim", hidden_dim, "token embedding width");
    cmd->add_option("--out-dim", out_dim, "output embedding width");
    cmd->add_option("--rank", lora_rank, "adapter rank");
    cmd->add_option("--encoder-seed", encoder_seed, "parameter init seed");
    cmd->add_option("--max-tokens", max_tokens, "token truncation limit");
    cmd->add_flag("--no-ancestor-expansion", no_ancestor_expansion,
                  "skip ancestor closure of label sets");
    cmd->add_flag("--no-depth-weighting", no_depth_weighting, "use uniform concept weights");
    cmd->add_flag("--no-mse", no_mse, "drop the similarity regression term");
    cmd->add_flag("--no-con", no_con, "drop the contrastive term");
    cmd->add_flag("--full-finetune", full_finetune, "train the whole projection, no adapter");
  }

  hicl::WorkbenchConfig resolve() const {
    hicl::WorkbenchConfig cfg;
    if (!config_path.empty()) {
      auto in = open_text_in(config_path);
      cfg = hicl::load_workbench_config(in);
    }
    auto passed = [&](const std::string& name) { return sub->count(name) > 0; };
    if (passed("--mesh-format")) cfg.mesh_format = hicl::mesh_format_from_string(mesh_format);
    hicl::TrainConfig& t = cfg.train;
    if (passed("--epochs")) t.epochs = epochs;
    if (passed("--seed")) t.seed = seed;
    if (passed("--validation-fraction")) t.validation_fraction = validation_fraction;
    if (passed("--lr")) t.optimizer.learning_rate = learning_rate;
    if (passed("--weight-decay")) t.optimizer.weight_decay = weight_decay;
    if (passed("--beta")) t.mining.beta = beta;
    if (passed("--lambda")) t.loss.lambda = lambda;
    if (passed("--batch-size")) t.mining.batch_size = batch_size;
    if (passed("--negatives")) t.mining.negatives_per_anchor = negatives;
    if (passed("--positive-reduction"))
      t.loss.positive_reduction = hicl::positive_reduction_from_string(positive_reduction);
    if (passed("--vocab-buckets")) t.encoder.vocab_buckets = vocab_buckets;
    if (passed("--hidden-dim")) t.encoder.hidden_dim = hidden_dim;
    if (passed("--out-dim")) t.encoder.out_dim = out_dim;
    if (passed("--rank")) t.encoder.lora_rank = lora_rank;
    if (passed("--encoder-seed")) t.encoder.seed = encoder_seed;
    if (passed("--max-tokens")) t.encoder.max_tokens = max_tokens;
    if (no_ancestor_expansion) t.flags.ancestor_expansion = false;
    if (no_depth_weighting) t.flags.depth_weighting = false;
    if (no_mse) t.loss.use_mse = false;
    if (no_con) t.loss.use_con = false;
    if (full_finetune) t.encoder.mode = hicl::EncoderMode::full;
    t.validate();
    return cfg;
  }
};

int cmd_parse_mesh(const std::string& input, const std::string& format,
                   const std::string& cache_out) {
  const hicl::MeshHierarchy h = load_hierarchy(input, format);
  size_t max_depth = 0;
  for (const auto& [ui, desc] : h.descriptors()) max_depth = std::max(max_depth, h.depth(ui));
  std::cout << "descriptors: " << h.size() << "\n"
            << "skipped (no tree numbers): " << h.stats().skipped_no_tree_numbers << "\n"
            << "branches: " << h.branch_roots().size() << "\n"
            << "max depth: " << max_depth << "\n";
  if (!cache_out.empty()) {
    auto out = open_binary_out(cache_out);
    hicl::write_hierarchy_cache(out, h);
    std::cout << "cache written: " << cache_out << "\n";
  }
  return 0;
}

int cmd_train(const PipelineOptions& opts, const std::string& checkpoint_out,
              const std::string& metrics_out, const std::string& pairs_out) {
  const hicl::WorkbenchConfig cfg = opts.resolve();
  const hicl::MeshHierarchy h = load_hierarchy(
      opts.mesh, opts.sub->count("--mesh-format") ? opts.mesh_format : to_string(cfg.mesh_format));
  const hicl::Corpus corpus = load_corpus(opts.corpus);

  const hicl::PreparedData data = hicl::prepare(corpus, h, cfg.train);
  std::cout << "docs: " << corpus.docs.size() << "  concepts: " << data.index.size()
            << "  pairs: +" << data.all_pairs.positives.size() << " -"
            << data.all_pairs.negatives.size() << " excluded "
            << data.all_pairs.excluded_count << "\n";
  if (!pairs_out.empty()) {
    auto out = open_text_out(pairs_out);
    hicl::write_pairs_tsv(out, data.all_pairs);
    std::cout << "pairs written: " << pairs_out << "\n";
  }

  const hicl::TrainResult result = hicl::train(corpus, h, cfg.train, &data);
  for (const hicl::EpochRecord& r : result.records) {
    std::cout << "epoch " << r.epoch << ": train " << r.train_loss;
    if (r.has_val) std::cout << "  val " << r.val_loss;
    std::cout << "  (" << r.batches << " batches)\n";
  }
  if (result.has_best_epoch) std::cout << "best epoch: " << result.best_epoch << "\n";

  if (!checkpoint_out.empty()) {
    auto out = open_binary_out(checkpoint_out);
    hicl::write_checkpoint(out, result.best_params);
    std::cout << "checkpoint written: " << checkpoint_out << "\n";
  }
  if (!metrics_out.empty()) {
    auto out = open_text_out(metrics_out);
    hicl::write_train_records(out, result.records);
    std::cout << "metrics written: " << metrics_out << "\n";
  }
  if (result.aborted)
    throw hicl::NumericError("training aborted: " + result.abort_reason +
                             " (best checkpoint preserved)");
  return 0;
}

struct EvalOptions {
  std::string checkpoint;
  std::string corpus;
  std::string queries;
  std::string qrels;
  uint32_t k = 10;
  std::string gain = "linear";
  std::string run_out;
  std::string dump_embeddings;
};

int cmd_eval_retrieval(const EvalOptions& opts, bool recall_first) {
  auto ckpt_in = open_binary_in(opts.checkpoint);
  const hicl::EncoderParams params = hicl::read_checkpoint(ckpt_in);
  const hicl::Corpus corpus = load_corpus(opts.corpus);
  const hicl::Corpus queries = load_corpus(opts.queries);
  auto qrels_in = open_text_in(opts.qrels);
  const hicl::Qrels qrels = hicl::read_qrels_tsv(qrels_in);

  const std::vector<hicl::EmbeddingVector> doc_vecs = encode_corpus(corpus, params);
  if (!opts.dump_embeddings.empty()) {
    auto out = open_binary_out(opts.dump_embeddings);
    hicl::write_embedding_dump(out, doc_vecs);
    std::cout << "embeddings written: " << opts.dump_embeddings << "\n";
  }
  std::vector<std::vector<double>> candidates;
  std::vector<std::string> ids;
  candidates.reserve(doc_vecs.size());
  ids.reserve(doc_vecs.size());
  for (size_t i = 0; i < doc_vecs.size(); ++i) {
    candidates.push_back(doc_vecs[i].values);
    ids.push_back(corpus.docs[i].id);
  }

  hicl::RetrievalRun run;
  for (const hicl::Document& q : queries.docs) {
    const hicl::EmbeddingVector qv = hicl::encode(q.text, params);
    run[q.id] = hicl::retrieve(qv.values, candidates, ids, opts.k);
  }
  if (!opts.run_out.empty()) {
    auto out = open_text_out(opts.run_out);
    hicl::write_run_tsv(out, run);
    std::cout << "run written: " << opts.run_out << "\n";
  }

  const hicl::GainScheme scheme = hicl::gain_scheme_from_string(opts.gain);
  const hicl::MetricSummary ndcg = hicl::mean_ndcg_at_k(run, qrels, opts.k, scheme);
  const hicl::MetricSummary recall = hicl::recall_at_k(run, qrels, opts.k);
  auto print = [&](const char* name, const hicl::MetricSummary& m) {
    std::cout << name << "@" << opts.k << ": " << m.value << "  (" << m.queries_scored
              << " queries scored, " << m.queries_excluded << " excluded)\n";
  };
  if (recall_first) {
    print("recall", recall);
    print("ndcg", ndcg);
  } else {
    print("ndcg", ndcg);
    print("recall", recall);
  }
  return 0;
}

int cmd_eval_sts(const std::string& checkpoint, const std::string& pairs_path) {
  auto ckpt_in = open_binary_in(checkpoint);
  const hicl::EncoderParams params = hicl::read_checkpoint(ckpt_in);
  auto in = open_text_in(pairs_path);

  std::vector<double> gold, predicted;
  std::string line;
  uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = hicl::split(line, '\t');
    if (fields.size() != 3)
      throw hicl::ParseError("line " + std::to_string(line_no) +
                             ": expected 3 tab-separated fields (score, text, text), got " +
                             std::to_string(fields.size()));
    gold.push_back(hicl::detail::parse_line_double(fields[0], line_no, "score"));
    const hicl::EmbeddingVector a = hicl::encode(fields[1], params);
    const hicl::EmbeddingVector b = hicl::encode(fields[2], params);
    predicted.push_back(hicl::embedding_similarity(a, b));
  }
  std::cout << "pairs: " << gold.size() << "\n"
            << "spearman: " << hicl::spearman(predicted, gold) << "\n";
  return 0;
}

int cmd_gradcheck(double epsilon, uint64_t coords, uint64_t seed, double tolerance) {
  hicl::SyntheticHierarchyConfig hcfg;
  hcfg.descriptors = 60;
  hcfg.seed = seed + 1;
  const hicl::MeshHierarchy h = hicl::synthetic_hierarchy(hcfg);
  hicl::SyntheticCorpusConfig ccfg;
  ccfg.n_docs = 40;
  ccfg.clusters = 6;
  ccfg.filler_tokens = 20;
  ccfg.noise_tokens = 8;
  ccfg.seed = seed + 2;
  const hicl::Corpus corpus = hicl::synthetic_corpus(h, ccfg);

  hicl::TrainConfig cfg;
  cfg.encoder.vocab_buckets = 512;
  cfg.encoder.hidden_dim = 32;
  cfg.encoder.out_dim = 16;
  cfg.encoder.lora_rank = 4;
  cfg.mining.batch_size = 12;
  cfg.loss.positive_reduction = hicl::PositiveReduction::sum;
  cfg.validation_fraction = 0.0;

  double worst = 0.0;
  for (const hicl::EncoderMode mode : {hicl::EncoderMode::lora, hicl::EncoderMode::full}) {
    cfg.encoder.mode = mode;
    const hicl::PreparedData data = hicl::prepare(corpus, h, cfg);
    hicl::MiningConfig mining = cfg.mining;
    mining.seed = hicl::mix_seed(cfg.seed, 77);
    const std::vector<hicl::PairBatch> batches = hicl::sample_batches(data.train_pairs, mining);

    hicl::EncoderParams params = hicl::init_params(cfg.encoder);
    // A zero adapter-up block makes the adapter-down gradient identically
    // zero, so perturb it before checking.
    hicl::Rng rng(hicl::mix_seed(seed, 13));
    hicl::fill_uniform(params.lora_up, rng, 0.1);

    const hicl::FiniteDiffResult r = hicl::finite_diff_check(
        batches.front(), data.tokens, params, cfg.loss, epsilon, coords, seed);
    std::cout << to_string(mode) << ": max relative error " << r.max_relative_error << " over "
              << r.coordinates_checked << " coordinates\n";
    worst = std::max(worst, r.max_relative_error);
  }
  if (!(worst < tolerance))
    throw hicl::NumericError("gradient check failed: max relative error " +
                             std::to_string(worst) + " >= " + std::to_string(tolerance));
  std::cout << "gradient check passed (tolerance " << tolerance << ")\n";
  return 0;
}

int cmd_grid(const PipelineOptions& opts, const std::string& betas_csv,
             const std::string& lambdas_csv, const std::string& json_out) {
  const hicl::WorkbenchConfig cfg = opts.resolve();
  const hicl::MeshHierarchy h = load_hierarchy(
      opts.mesh, opts.sub->count("--mesh-format") ? opts.mesh_format : to_string(cfg.mesh_format));
  const hicl::Corpus corpus = load_corpus(opts.corpus);

  auto parse_list = [](const std::string& csv, const char* what) {
    std::vector<double> out;
    for (const std::string& item : hicl::split(csv, ',')) {
      if (hicl::trim(item).empty()) continue;
      out.push_back(hicl::detail::parse_line_double(hicl::trim(item), 0, what));
    }
    if (out.empty()) throw hicl::ConfigError(std::string("empty ") + what + " list");
    return out;
  };
  const std::vector<double> betas = parse_list(betas_csv, "beta");
  const std::vector<double> lambdas = parse_list(lambdas_csv, "lambda");

  nlohmann::json rows = nlohmann::json::array();
  bool have_best = false;
  double best_alignment = 0.0;
  double best_beta = 0.0, best_lambda = 0.0;
  for (const double beta : betas) {
    for (const double lambda : lambdas) {
      hicl::TrainConfig t = cfg.train;
      t.mining.beta = beta;
      t.loss.lambda = lambda;
      const hicl::PreparedData data = hicl::prepare(corpus, h, t);
      const hicl::TrainResult result = hicl::train(corpus, h, t, &data);
      const hicl::AlignmentReport probe =
          hicl::evaluate_alignment(result.best_params, data.tokens, data.val_pairs);
      const bool has_val = !result.records.empty() && result.records.back().has_val;
      const double val = has_val ? result.records.back().val_loss
                                 : std::numeric_limits<double>::quiet_NaN();
      std::cout << "beta " << beta << "  lambda " << lambda << "  val "
                << (has_val ? std::to_string(val) : std::string("-")) << "  alignment "
                << probe.spearman_alignment << "  negative-sim "
                << probe.mean_negative_similarity << (result.aborted ? "  [aborted]" : "")
                << "\n";
      rows.push_back({{"beta", beta},
                      {"lambda", lambda},
                      {"val_loss", has_val ? nlohmann::json(val) : nlohmann::json(nullptr)},
                      {"alignment", probe.spearman_alignment},
                      {"negative_similarity", probe.mean_negative_similarity},
                      {"aborted", result.aborted}});
      // Raw losses are not comparable across thresholds (the pair sets
      // differ), so the sweep is ranked by the normalized alignment probe.
      if (!result.aborted && (!have_best || probe.spearman_alignment > best_alignment)) {
        have_best = true;
        best_alignment = probe.spearman_alignment;
        best_beta = beta;
        best_lambda = lambda;
      }
    }
  }
  if (have_best)
    std::cout << "best by held-out alignment: beta " << best_beta << "  lambda " << best_lambda
              << "\n";
  if (!json_out.empty()) {
    auto out = open_text_out(json_out);
    out << rows.dump(2) << "\n";
    std::cout << "grid written: " << json_out << "\n";
  }
  return 0;
}

int cmd_ablate(const PipelineOptions& opts, const std::string& json_out) {
  const hicl::WorkbenchConfig cfg = opts.resolve();
  const hicl::MeshHierarchy h = load_hierarchy(
      opts.mesh, opts.sub->count("--mesh-format") ? opts.mesh_format : to_string(cfg.mesh_format));
  const hicl::Corpus corpus = load_corpus(opts.corpus);

  const std::vector<hicl::AblationRow> rows = hicl::run_ablation_suite(corpus, h, cfg.train);
  nlohmann::json json_rows = nlohmann::json::array();
  for (const hicl::AblationRow& row : rows) {
    std::cout << row.name << ": alignment " << row.alignment.spearman_alignment
              << "  negative-sim " << row.alignment.mean_negative_similarity << "  train-loss "
              << row.final_train_loss << (row.aborted ? "  [aborted]" : "") << "\n";
    json_rows.push_back({{"name", row.name},
                         {"alignment", row.alignment.spearman_alignment},
                         {"negative_similarity", row.alignment.mean_negative_similarity},
                         {"final_train_loss", row.final_train_loss},
                         {"aborted", row.aborted}});
  }
  if (!json_out.empty()) {
    auto out = open_text_out(json_out);
    out << json_rows.dump(2) << "\n";
    std::cout << "ablation written: " << json_out << "\n";
  }
  return 0;
}

int cmd_bench(uint32_t descriptors, uint32_t docs, uint32_t epochs, const std::string& json_out) {
  hicl::BenchConfig cfg;
  cfg.hierarchy.descriptors = descriptors;
  cfg.corpus.n_docs = docs;
  cfg.train.epochs = epochs;
  const hicl::BenchReport report = hicl::run_bench(cfg);
  nlohmann::json j = {{"descriptors", report.descriptors},
                      {"docs", report.docs},
                      {"positive_pairs", report.positive_pairs},
                      {"negative_pairs", report.negative_pairs},
                      {"hierarchy_seconds", report.hierarchy_seconds},
                      {"prepare_seconds", report.prepare_seconds},
                      {"train_seconds", report.train_seconds},
                      {"encode_seconds", report.encode_seconds},
                      {"encode_docs_per_second", report.encode_docs_per_second},
                      {"peak_rss_kb", report.peak_rss_kb}};
  std::cout << j.dump(2) << "\n";
  if (!json_out.empty()) {
    auto out = open_text_out(json_out);
    out << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_synth(const std::string& out_dir, uint32_t descriptors, uint32_t docs, uint32_t clusters,
              uint32_t n_queries, uint64_t seed) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw hicl::DataError("cannot create directory '" + out_dir + "': " + ec.message());

  hicl::SyntheticHierarchyConfig hcfg;
  hcfg.descriptors = descriptors;
  hcfg.seed = seed;
  const hicl::MeshHierarchy h = hicl::synthetic_hierarchy(hcfg);
  hicl::SyntheticCorpusConfig ccfg;
  ccfg.n_docs = docs;
  ccfg.clusters = clusters;
  ccfg.filler_tokens = 90;
  ccfg.seed = seed;
  const hicl::Corpus corpus = hicl::synthetic_corpus(h, ccfg);
  if (n_queries == 0 || n_queries > corpus.docs.size())
    throw hicl::ConfigError("query count must be in [1, docs]");

  {
    auto out = open_text_out(out_dir + "/mesh.tsv");
    hicl::write_descriptors_tsv(out, h);
  }
  {
    auto out = open_text_out(out_dir + "/corpus.jsonl");
    hicl::write_corpus_jsonl(out, corpus);
  }

  const hicl::ConceptIndex index = hicl::ConceptIndex::build(corpus.annotations(), h, true);
  const hicl::WeightVector weights = hicl::depth_weights(index, h, true);
  std::vector<hicl::LabelVector> vectors;
  vectors.reserve(corpus.docs.size());
  for (const hicl::Document& d : corpus.docs)
    vectors.push_back(hicl::vectorize(d.mesh, index, h, true));

  // Queries reuse the first documents; judgments grade label similarity into
  // bands (3 near-duplicate, 2 strong overlap, 1 above-threshold overlap).
  hicl::Corpus queries;
  hicl::Qrels qrels;
  for (uint32_t q = 0; q < n_queries; ++q) {
    queries.docs.push_back(corpus.docs[q]);
    for (size_t d = 0; d < corpus.docs.size(); ++d) {
      const double sim = hicl::label_similarity(vectors[q], vectors[d], weights);
      int grade = 0;
      if (sim >= 0.8)
        grade = 3;
      else if (sim >= 0.5)
        grade = 2;
      else if (sim > 0.3)
        grade = 1;
      if (grade > 0) qrels[corpus.docs[q].id][corpus.docs[d].id] = grade;
    }
  }
  {
    auto out = open_text_out(out_dir + "/queries.jsonl");
    hicl::write_corpus_jsonl(out, queries);
  }
  {
    auto out = open_text_out(out_dir + "/qrels.tsv");
    hicl::write_qrels_tsv(out, qrels);
  }

  {
    auto out = open_text_out(out_dir + "/sts.tsv");
    hicl::Rng rng(hicl::mix_seed(seed, 0x535453u));
    const uint32_t n_pairs = std::min<uint32_t>(200, docs * (docs - 1) / 2);
    for (uint32_t p = 0; p < n_pairs; ++p) {
      const auto i = static_cast<size_t>(rng.below(corpus.docs.size()));
      auto j = static_cast<size_t>(rng.below(corpus.docs.size() - 1));
      if (j >= i) ++j;
      const double sim = hicl::label_similarity(vectors[i], vectors[j], weights);
      out << hicl::detail::format_double(sim) << '\t' << corpus.docs[i].text << '\t'
          << corpus.docs[j].text << '\n';
    }
  }

  std::cout << "wrote " << out_dir << "/{mesh.tsv, corpus.jsonl, queries.jsonl, qrels.tsv, sts.tsv}\n"
            << "descriptors: " << h.size() << "  docs: " << corpus.docs.size()
            << "  queries: " << queries.docs.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical contrastive embedding workbench"};
  app.require_subcommand(1);

  // parse-mesh
  auto* parse_cmd = app.add_subcommand("parse-mesh", "parse a descriptor file and report stats");
  std::string pm_input, pm_format = "tsv", pm_cache;
  parse_cmd->add_option("--input", pm_input, "descriptor file")->required();
  parse_cmd->add_option("--format", pm_format, "tsv, xml, or cache")
      ->check(CLI::IsMember({"tsv", "xml", "cache"}));
  parse_cmd->add_option("--cache", pm_cache, "write a binary hierarchy cache");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the encoder on a corpus");
  PipelineOptions train_opts;
  train_opts.attach(train_cmd);
  std::string tr_checkpoint, tr_metrics, tr_pairs;
  train_cmd->add_option("--checkpoint", tr_checkpoint, "write best parameters here");
  train_cmd->add_option("--metrics", tr_metrics, "write per-epoch records (JSONL)");
  train_cmd->add_option("--dump-pairs", tr_pairs, "write mined pairs (TSV)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained checkpoint");
  eval_cmd->require_subcommand(1);
  EvalOptions eval_opts;
  auto attach_eval = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", eval_opts.checkpoint, "trained checkpoint")->required();
    sub->add_option("--corpus", eval_opts.corpus, "candidate corpus JSONL")->required();
    sub->add_option("--queries", eval_opts.queries, "query corpus JSONL")->required();
    sub->add_option("--qrels", eval_opts.qrels, "graded judgments TSV")->required();
    sub->add_option("--k", eval_opts.k, "ranking depth");
    sub->add_option("--gain", eval_opts.gain, "ndcg gain: linear or exponential")
        ->check(CLI::IsMember({"linear", "exponential"}));
    sub->add_option("--run-out", eval_opts.run_out, "write the ranking (TSV)");
    sub->add_option("--dump-embeddings", eval_opts.dump_embeddings,
                    "write candidate embeddings (binary, 32-bit)");
  };
  auto* retrieve_cmd = eval_cmd->add_subcommand("retrieve", "graded ad-hoc retrieval");
  attach_eval(retrieve_cmd);
  auto* qa_cmd = eval_cmd->add_subcommand("qa", "answer-passage retrieval");
  attach_eval(qa_cmd);
  auto* sts_cmd = eval_cmd->add_subcommand("sts", "scored text pair correlation");
  std::string sts_checkpoint, sts_pairs;
  sts_cmd->add_option("--checkpoint", sts_checkpoint, "trained checkpoint")->required();
  sts_cmd->add_option("--pairs", sts_pairs, "TSV: score, text, text")->required();

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "compare analytic and numeric gradients");
  double gc_epsilon = 1e-4, gc_tolerance = 1e-4;
  uint64_t gc_coords = 50, gc_seed = 5;
  grad_cmd->add_option("--epsilon", gc_epsilon, "finite difference step");
  grad_cmd->add_option("--coords", gc_coords, "sampled coordinates per mode");
  grad_cmd->add_option("--seed", gc_seed, "sampling seed");
  grad_cmd->add_option("--tolerance", gc_tolerance, "max allowed relative error");

  // grid
  auto* grid_cmd = app.add_subcommand("grid", "sweep mining threshold and contrastive weight");
  PipelineOptions grid_opts;
  grid_opts.attach(grid_cmd);
  std::string grid_betas = "0.1,0.3,0.5", grid_lambdas = "0.05,0.1,0.2", grid_json;
  grid_cmd->add_option("--betas", grid_betas, "comma-separated thresholds");
  grid_cmd->add_option("--lambdas", grid_lambdas, "comma-separated weights");
  grid_cmd->add_option("--out", grid_json, "write rows as JSON");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "train single-change variants and compare");
  PipelineOptions ablate_opts;
  ablate_opts.attach(ablate_cmd);
  std::string ablate_json;
  ablate_cmd->add_option("--out", ablate_json, "write rows as JSON");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "time the pipeline on synthetic data");
  uint32_t bench_descriptors = 400, bench_docs = 200, bench_epochs = 1;
  std::string bench_json;
  bench_cmd->add_option("--descriptors", bench_descriptors, "synthetic hierarchy size");
  bench_cmd->add_option("--docs", bench_docs, "synthetic corpus size");
  bench_cmd->add_option("--epochs", bench_epochs, "training epochs to time");
  bench_cmd->add_option("--out", bench_json, "write the report as JSON");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_dir;
  uint32_t synth_descriptors = 200, synth_docs = 500, synth_clusters = 12, synth_queries = 25;
  uint64_t synth_seed = 7;
  synth_cmd->add_option("--out-dir", synth_dir, "output directory")->required();
  synth_cmd->add_option("--descriptors", synth_descriptors, "hierarchy size");
  synth_cmd->add_option("--docs", synth_docs, "corpus size");
  synth_cmd->add_option("--clusters", synth_clusters, "label clusters");
  synth_cmd->add_option("--queries", synth_queries, "query count");
  synth_cmd->add_option("--seed", synth_seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*parse_cmd) return cmd_parse_mesh(pm_input, pm_format, pm_cache);
    if (*train_cmd) return cmd_train(train_opts, tr_checkpoint, tr_metrics, tr_pairs);
    if (*retrieve_cmd) return cmd_eval_retrieval(eval_opts, false);
    if (*qa_cmd) return cmd_eval_retrieval(eval_opts, true);
    if (*sts_cmd) return cmd_eval_sts(sts_checkpoint, sts_pairs);
    if (*grad_cmd) return cmd_gradcheck(gc_epsilon, gc_coords, gc_seed, gc_tolerance);
    if (*grid_cmd) return cmd_grid(grid_opts, grid_betas, grid_lambdas, grid_json);
    if (*ablate_cmd) return cmd_ablate(ablate_opts, ablate_json);
    if (*bench_cmd) return cmd_bench(bench_descriptors, bench_docs, bench_epochs, bench_json);
    if (*synth_cmd)
      return cmd_synth(synth_dir, synth_descriptors, synth_docs, synth_clusters, synth_queries,
                       synth_seed);
  } catch (const hicl::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const hicl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
