#pragma once

// On-disk formats. Text formats are line-oriented (JSONL corpus, TSV
// judgments/runs/pairs); binary formats share a four-byte magic and a
// version word, with all integers and floats little-endian. Embedding dumps
// narrow to 32-bit floats; checkpoints keep full 64-bit parameters so a
// round trip is bitwise.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hicl/encoder.hpp"
#include "hicl/metrics.hpp"
#include "hicl/trainer.hpp"

namespace hicl {

inline constexpr char kBinaryMagic[4] = {'B', 'H', 'C', 'L'};
inline constexpr uint32_t kEmbeddingDumpVersion = 1;
inline constexpr uint32_t kCheckpointVersion = 1;
inline constexpr uint32_t kHierarchyCacheVersion = 1;

namespace detail {

inline void write_bytes(std::ostream& out, const void* data, size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw DataError("write failed");
}

inline void write_u8(std::ostream& out, uint8_t v) { write_bytes(out, &v, 1); }

inline void write_u32(std::ostream& out, uint32_t v) {
  uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                  static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  write_bytes(out, b, 4);
}

inline void write_u64(std::ostream& out, uint64_t v) {
  write_u32(out, static_cast<uint32_t>(v));
  write_u32(out, static_cast<uint32_t>(v >> 32));
}

inline void write_f32(std::ostream& out, float v) { write_u32(out, std::bit_cast<uint32_t>(v)); }

inline void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<uint64_t>(v)); }

inline void write_str(std::ostream& out, const std::string& s) {
  if (s.size() > UINT32_MAX) throw DataError("string too long to serialize");
  write_u32(out, static_cast<uint32_t>(s.size()));
  write_bytes(out, s.data(), s.size());
}

inline void read_bytes(std::istream& in, void* data, size_t n, const char* what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    throw ParseError(std::string("truncated input while reading ") + what);
}

inline uint8_t read_u8(std::istream& in, const char* what) {
  uint8_t v;
  read_bytes(in, &v, 1, what);
  return v;
}

inline uint32_t read_u32(std::istream& in, const char* what) {
  uint8_t b[4];
  read_bytes(in, b, 4, what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline uint64_t read_u64(std::istream& in, const char* what) {
  const uint64_t lo = read_u32(in, what);
  const uint64_t hi = read_u32(in, what);
  return lo | (hi << 32);
}

inline float read_f32(std::istream& in, const char* what) {
  return std::bit_cast<float>(read_u32(in, what));
}

inline double read_f64(std::istream& in, const char* what) {
  return std::bit_cast<double>(read_u64(in, what));
}

inline std::string read_str(std::istream& in, const char* what) {
  const uint32_t n = read_u32(in, what);
  std::string s(n, '\0');
  if (n > 0) read_bytes(in, s.data(), n, what);
  return s;
}

inline void write_magic(std::ostream& out, uint32_t version) {
  write_bytes(out, kBinaryMagic, 4);
  write_u32(out, version);
}

inline void expect_magic(std::istream& in, uint32_t version, const char* what) {
  char magic[4];
  read_bytes(in, magic, 4, what);
  if (std::memcmp(magic, kBinaryMagic, 4) != 0)
    throw ParseError(std::string(what) + ": bad magic, not a recognized binary file");
  const uint32_t got = read_u32(in, what);
  if (got != version)
    throw ParseError(std::string(what) + ": unsupported version " + std::to_string(got) +
                     " (expected " + std::to_string(version) + ")");
}

// Shortest round-trip-exact decimal rendering for TSV output.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline int parse_line_int(const std::string& field, uint64_t line, const char* what) {
  try {
    size_t used = 0;
    const int v = std::stoi(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line) + ": bad " + what + " '" + field + "'");
  }
}

inline double parse_line_double(const std::string& field, uint64_t line, const char* what) {
  try {
    size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line) + ": bad " + what + " '" + field + "'");
  }
}

}  // namespace detail

// ---- corpus (JSONL) ----

inline Corpus read_corpus_jsonl(std::istream& in) {
  Corpus corpus;
  std::string line;
  uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (!doc.is_object())
      throw ParseError("line " + std::to_string(line_no) + ": expected a JSON object");
    for (const char* key : {"id", "text", "mesh"})
      if (!doc.contains(key))
        throw ParseError("line " + std::to_string(line_no) + ": missing key '" + key + "'");
    if (!doc["id"].is_string() || !doc["text"].is_string() || !doc["mesh"].is_array())
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected string id, string text, array mesh");
    Document d;
    d.id = doc["id"].get<std::string>();
    d.text = doc["text"].get<std::string>();
    for (const auto& label : doc["mesh"]) {
      if (!label.is_string())
        throw ParseError("line " + std::to_string(line_no) + ": mesh entries must be strings");
      d.mesh.insert(label.get<std::string>());
    }
    corpus.docs.push_back(std::move(d));
  }
  corpus.validate();
  return corpus;
}

inline void write_corpus_jsonl(std::ostream& out, const Corpus& corpus) {
  for (const Document& d : corpus.docs) {
    nlohmann::json doc;
    doc["id"] = d.id;
    doc["text"] = d.text;
    doc["mesh"] = d.mesh;
    out << doc.dump() << '\n';
  }
  if (!out) throw DataError("corpus write failed");
}

// ---- qrels and runs (TSV) ----

inline Qrels read_qrels_tsv(std::istream& in) {
  Qrels qrels;
  std::string line;
  uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 3)
      throw ParseError("line " + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                       std::to_string(fields.size()));
    const int grade = detail::parse_line_int(fields[2], line_no, "grade");
    if (grade < 0) throw ParseError("line " + std::to_string(line_no) + ": negative grade");
    auto [it, inserted] = qrels[fields[0]].emplace(fields[1], grade);
    if (!inserted)
      throw ParseError("line " + std::to_string(line_no) + ": duplicate judgment for query '" +
                       fields[0] + "' doc '" + fields[1] + "'");
  }
  return qrels;
}

inline void write_qrels_tsv(std::ostream& out, const Qrels& qrels) {
  for (const auto& [query, judgments] : qrels)
    for (const auto& [doc, grade] : judgments) out << query << '\t' << doc << '\t' << grade << '\n';
  if (!out) throw DataError("qrels write failed");
}

inline void write_run_tsv(std::ostream& out, const RetrievalRun& run) {
  for (const auto& [query, ranking] : run)
    for (const RankedDoc& rd : ranking)
      out << query << '\t' << rd.doc_id << '\t' << rd.rank << '\t'
          << detail::format_double(rd.score) << '\n';
  if (!out) throw DataError("run write failed");
}

inline RetrievalRun read_run_tsv(std::istream& in) {
  RetrievalRun run;
  std::string line;
  uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 4)
      throw ParseError("line " + std::to_string(line_no) + ": expected 4 tab-separated fields, got " +
                       std::to_string(fields.size()));
    const int rank = detail::parse_line_int(fields[2], line_no, "rank");
    if (rank <= 0) throw ParseError("line " + std::to_string(line_no) + ": rank must be positive");
    const double score = detail::parse_line_double(fields[3], line_no, "score");
    run[fields[0]].push_back({fields[1], static_cast<uint32_t>(rank), score});
  }
  return run;
}

// ---- mined pairs (TSV) ----

inline void write_pairs_tsv(std::ostream& out, const PairSet& pairs) {
  for (const ScoredPair& p : pairs.positives)
    out << "P\t" << p.i << '\t' << p.j << '\t' << detail::format_double(p.sim) << '\n';
  for (const DocPair& p : pairs.negatives) out << "N\t" << p.i << '\t' << p.j << "\t0\n";
  if (!out) throw DataError("pairs write failed");
}

inline PairSet read_pairs_tsv(std::istream& in) {
  PairSet pairs;
  std::string line;
  uint64_t line_no = 0;
  uint32_t max_doc = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 4)
      throw ParseError("line " + std::to_string(line_no) + ": expected 4 tab-separated fields, got " +
                       std::to_string(fields.size()));
    if (fields[0] != "P" && fields[0] != "N")
      throw ParseError("line " + std::to_string(line_no) + ": pair kind must be P or N, got '" +
                       fields[0] + "'");
    const int i = detail::parse_line_int(fields[1], line_no, "doc index");
    const int j = detail::parse_line_int(fields[2], line_no, "doc index");
    if (i < 0 || j < 0 || i >= j)
      throw ParseError("line " + std::to_string(line_no) + ": pair indices must satisfy 0 <= i < j");
    const double sim = detail::parse_line_double(fields[3], line_no, "similarity");
    if (fields[0] == "P")
      pairs.positives.push_back({static_cast<uint32_t>(i), static_cast<uint32_t>(j), sim});
    else
      pairs.negatives.push_back({static_cast<uint32_t>(i), static_cast<uint32_t>(j)});
    max_doc = std::max(max_doc, static_cast<uint32_t>(j));
    any = true;
  }
  pairs.n_docs = any ? max_doc + 1 : 0;
  return pairs;
}

// ---- embedding dump (binary, f32) ----

inline void write_embedding_dump(std::ostream& out, const std::vector<EmbeddingVector>& rows) {
  if (rows.empty()) throw DataError("refusing to write an empty embedding dump");
  const size_t dims = rows.front().values.size();
  bool any_flag = false;
  for (const EmbeddingVector& row : rows) {
    if (row.values.size() != dims) throw DataError("embedding rows disagree in dimension");
    any_flag = any_flag || row.degenerate;
  }
  detail::write_magic(out, kEmbeddingDumpVersion);
  detail::write_u32(out, static_cast<uint32_t>(rows.size()));
  detail::write_u32(out, static_cast<uint32_t>(dims));
  detail::write_u8(out, any_flag ? 1 : 0);
  for (const EmbeddingVector& row : rows)
    for (double v : row.values) detail::write_f32(out, static_cast<float>(v));
  if (any_flag)
    for (const EmbeddingVector& row : rows) detail::write_u8(out, row.degenerate ? 1 : 0);
  if (!out) throw DataError("embedding dump write failed");
}

inline std::vector<EmbeddingVector> read_embedding_dump(std::istream& in) {
  detail::expect_magic(in, kEmbeddingDumpVersion, "embedding dump");
  const uint32_t n_rows = detail::read_u32(in, "embedding dump row count");
  const uint32_t dims = detail::read_u32(in, "embedding dump dimension");
  const uint8_t flags_present = detail::read_u8(in, "embedding dump flag byte");
  if (flags_present > 1) throw ParseError("embedding dump: flag byte must be 0 or 1");
  std::vector<EmbeddingVector> rows(n_rows);
  for (EmbeddingVector& row : rows) {
    row.values.resize(dims);
    for (uint32_t d = 0; d < dims; ++d)
      row.values[d] = detail::read_f32(in, "embedding dump values");
  }
  if (flags_present == 1)
    for (EmbeddingVector& row : rows)
      row.degenerate = detail::read_u8(in, "embedding dump flags") != 0;
  return rows;
}

// ---- checkpoint (binary, f64 + config trailer) ----

namespace detail {

inline void write_section(std::ostream& out, const std::string& name, const Matrix& m) {
  write_str(out, name);
  write_u32(out, static_cast<uint32_t>(m.rows()));
  write_u32(out, static_cast<uint32_t>(m.cols()));
  for (double v : m.values()) write_f64(out, v);
}

inline Matrix read_section(std::istream& in, const std::string& expected_name) {
  const std::string name = read_str(in, "checkpoint section name");
  if (name != expected_name)
    throw ParseError("checkpoint: expected section '" + expected_name + "', found '" + name + "'");
  const uint32_t rows = read_u32(in, "checkpoint section rows");
  const uint32_t cols = read_u32(in, "checkpoint section cols");
  Matrix m(rows, cols);
  for (size_t i = 0; i < m.size(); ++i) m.at_flat(i) = read_f64(in, "checkpoint section values");
  return m;
}

}  // namespace detail

inline nlohmann::json encoder_config_to_json(const EncoderConfig& cfg) {
  return {{"vocab_buckets", cfg.vocab_buckets}, {"hidden_dim", cfg.hidden_dim},
          {"out_dim", cfg.out_dim},             {"lora_rank", cfg.lora_rank},
          {"seed", cfg.seed},                   {"max_tokens", cfg.max_tokens},
          {"mode", to_string(cfg.mode)}};
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"vocab_buckets", "hidden_dim", "out_dim",
                                              "lora_rank",     "seed",       "max_tokens",
                                              "mode"};
  for (const auto& [key, value] : j.items())
    if (known.count(key) == 0) throw ConfigError("unknown encoder key '" + key + "'");
  EncoderConfig cfg;
  if (j.contains("vocab_buckets")) cfg.vocab_buckets = j["vocab_buckets"].get<uint32_t>();
  if (j.contains("hidden_dim")) cfg.hidden_dim = j["hidden_dim"].get<uint32_t>();
  if (j.contains("out_dim")) cfg.out_dim = j["out_dim"].get<uint32_t>();
  if (j.contains("lora_rank")) cfg.lora_rank = j["lora_rank"].get<uint32_t>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
  if (j.contains("max_tokens")) cfg.max_tokens = j["max_tokens"].get<uint32_t>();
  if (j.contains("mode")) cfg.mode = encoder_mode_from_string(j["mode"].get<std::string>());
  cfg.validate();
  return cfg;
}

inline void write_checkpoint(std::ostream& out, const EncoderParams& params) {
  detail::write_magic(out, kCheckpointVersion);
  detail::write_section(out, "token_table", params.token_table);
  detail::write_section(out, "projection", params.projection);
  detail::write_section(out, "lora_down", params.lora_down);
  detail::write_section(out, "lora_up", params.lora_up);
  detail::write_str(out, encoder_config_to_json(params.config).dump());
  if (!out) throw DataError("checkpoint write failed");
}

inline EncoderParams read_checkpoint(std::istream& in) {
  detail::expect_magic(in, kCheckpointVersion, "checkpoint");
  EncoderParams params;
  params.token_table = detail::read_section(in, "token_table");
  params.projection = detail::read_section(in, "projection");
  params.lora_down = detail::read_section(in, "lora_down");
  params.lora_up = detail::read_section(in, "lora_up");
  const std::string config_json = detail::read_str(in, "checkpoint config");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(config_json);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("checkpoint: invalid config trailer: ") + e.what());
  }
  params.config = encoder_config_from_json(j);

  const EncoderConfig& c = params.config;
  auto expect_shape = [](const Matrix& m, size_t rows, size_t cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols)
      throw ParseError(std::string("checkpoint: section '") + name + "' has shape " +
                       std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
                       std::to_string(rows) + "x" + std::to_string(cols));
  };
  expect_shape(params.token_table, c.vocab_buckets, c.hidden_dim, "token_table");
  expect_shape(params.projection, c.out_dim, c.hidden_dim, "projection");
  expect_shape(params.lora_down, c.lora_rank, c.hidden_dim, "lora_down");
  expect_shape(params.lora_up, c.out_dim, c.lora_rank, "lora_up");
  return params;
}

// ---- hierarchy cache (binary) ----

inline void write_hierarchy_cache(std::ostream& out, const MeshHierarchy& h) {
  detail::write_magic(out, kHierarchyCacheVersion);
  detail::write_u64(out, h.size());
  for (const auto& [ui, desc] : h.descriptors()) {
    detail::write_str(out, desc.ui);
    detail::write_str(out, desc.name);
    detail::write_u32(out, static_cast<uint32_t>(desc.tree_numbers.size()));
    for (const TreeNumber& t : desc.tree_numbers) detail::write_str(out, t.str());
  }
  detail::write_u64(out, h.stats().descriptors);
  detail::write_u64(out, h.stats().skipped_no_tree_numbers);
  if (!out) throw DataError("hierarchy cache write failed");
}

inline MeshHierarchy read_hierarchy_cache(std::istream& in) {
  detail::expect_magic(in, kHierarchyCacheVersion, "hierarchy cache");
  const uint64_t count = detail::read_u64(in, "hierarchy cache descriptor count");
  MeshHierarchy h;
  for (uint64_t i = 0; i < count; ++i) {
    MeshDescriptor desc;
    desc.ui = detail::read_str(in, "hierarchy cache descriptor ui");
    desc.name = detail::read_str(in, "hierarchy cache descriptor name");
    const uint32_t n_trees = detail::read_u32(in, "hierarchy cache tree count");
    for (uint32_t t = 0; t < n_trees; ++t)
      desc.tree_numbers.push_back(TreeNumber::parse(detail::read_str(in, "hierarchy cache tree")));
    h.add(std::move(desc));
  }
  ParseStats stats;
  stats.descriptors = detail::read_u64(in, "hierarchy cache stats");
  stats.skipped_no_tree_numbers = detail::read_u64(in, "hierarchy cache stats");
  h.set_stats(stats);
  return h;
}

// ---- training metrics (JSONL) ----

inline nlohmann::json epoch_record_to_json(const EpochRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  if (r.has_val)
    j["val_loss"] = r.val_loss;
  else
    j["val_loss"] = nullptr;
  j["batches"] = r.batches;
  j["mse_pairs"] = r.mse_pairs;
  j["con_anchors"] = r.con_anchors;
  j["skipped_anchors"] = r.skipped_anchors;
  return j;
}

inline void write_train_records(std::ostream& out, const std::vector<EpochRecord>& records) {
  for (const EpochRecord& r : records) out << epoch_record_to_json(r).dump() << '\n';
  if (!out) throw DataError("metrics write failed");
}

}  // namespace hicl
