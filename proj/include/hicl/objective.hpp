#pragma once

// Loss surface: filtered regression of embedding similarity onto label
// similarity over the mined positives, plus the hierarchy-weighted
// contrastive term, combined as l_mse + lambda * l_con. Gradients are exact
// and accumulated in a fixed order (anchor order, then pair order).
//
// The contrastive term is implemented exactly as specified: the label
// similarity weight sits inside the log, the denominator sums over the
// anchor's negatives only, and there is no temperature. The loss can
// therefore be negative; tests pin finiteness and oracle equality, not sign.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "hicl/encoder.hpp"
#include "hicl/pair_mining.hpp"

namespace hicl {

enum class PositiveReduction { mean, sum };

inline std::string to_string(PositiveReduction r) {
  return r == PositiveReduction::mean ? "mean" : "sum";
}

inline PositiveReduction positive_reduction_from_string(const std::string& s) {
  if (s == "mean") return PositiveReduction::mean;
  if (s == "sum") return PositiveReduction::sum;
  throw ConfigError("unknown positive_reduction '" + s + "' (expected 'mean' or 'sum')");
}

struct LossConfig {
  double lambda = 0.1;
  bool use_mse = true;
  bool use_con = true;
  // mean: average over all counted anchor-positive terms in the batch.
  // sum: per-anchor sum over positives, averaged over counted anchors.
  PositiveReduction positive_reduction = PositiveReduction::mean;
};

struct LossReport {
  double l_mse = 0.0;
  double l_con = 0.0;
  double total = 0.0;
  uint64_t mse_pairs_used = 0;
  uint64_t con_anchors_used = 0;
  uint64_t skipped_anchors = 0;
};

// Forward pass over the unique documents of a batch, keyed by document id.
class BatchForward {
 public:
  static BatchForward run(const PairBatch& batch,
                          const std::vector<std::vector<uint32_t>>& doc_tokens,
                          const EncoderParams& params) {
    BatchForward fwd;
    for (uint32_t doc : batch.docs()) {
      if (doc >= doc_tokens.size())
        throw DataError("batch references document " + std::to_string(doc) +
                        " outside the tokenized corpus of size " +
                        std::to_string(doc_tokens.size()));
      fwd.traces_.emplace(doc, encode_trace(doc_tokens[doc], params));
    }
    return fwd;
  }

  const EncodeTrace& trace(uint32_t doc) const {
    auto it = traces_.find(doc);
    if (it == traces_.end())
      throw LookupError("document " + std::to_string(doc) + " not in batch forward cache");
    return it->second;
  }

  std::span<const double> unit(uint32_t doc) const { return trace(doc).unit; }

  double sim(uint32_t a, uint32_t b) const {
    const double d = dot(unit(a), unit(b));
    return std::min(1.0, std::max(-1.0, d));
  }

  const std::map<uint32_t, EncodeTrace>& traces() const { return traces_; }

 private:
  std::map<uint32_t, EncodeTrace> traces_;
};

namespace detail {

// Unordered (min, max) pairs of the batch's anchor-positive edges, each
// counted once, in first-encounter order.
inline std::vector<ScoredPair> batch_mse_pairs(const PairBatch& batch) {
  std::vector<ScoredPair> pairs;
  std::set<std::pair<uint32_t, uint32_t>> seen;
  for (const BatchAnchor& a : batch.anchors) {
    for (const auto& [p, sim] : a.positives) {
      const auto key = std::minmax(a.doc, p);
      if (seen.insert(key).second) pairs.push_back({key.first, key.second, sim});
    }
  }
  return pairs;
}

}  // namespace detail

// SimFn: (uint32_t, uint32_t) -> double, the embedding similarity of two docs.
template <typename SimFn>
double loss_mse(const PairBatch& batch, SimFn&& sim, uint64_t* pairs_used = nullptr) {
  double total = 0.0;
  const auto pairs = detail::batch_mse_pairs(batch);
  for (const ScoredPair& p : pairs) {
    const double diff = sim(p.i, p.j) - p.sim;
    total += diff * diff;
  }
  if (pairs_used != nullptr) *pairs_used = pairs.size();
  return total;
}

template <typename SimFn>
double loss_con(const PairBatch& batch, SimFn&& sim, const LossConfig& cfg,
                uint64_t* anchors_used = nullptr, uint64_t* skipped = nullptr) {
  double term_sum = 0.0;
  uint64_t n_terms = 0;
  uint64_t n_anchors = 0;
  uint64_t n_skipped = 0;
  for (const BatchAnchor& a : batch.anchors) {
    if (a.positives.empty() || a.negatives.empty()) {
      ++n_skipped;
      continue;
    }
    double denom = 0.0;
    for (uint32_t neg : a.negatives) denom += std::exp(sim(a.doc, neg));
    const double log_denom = std::log(denom);
    for (const auto& [pos, weight] : a.positives) {
      if (weight <= 0.0)
        throw NumericError("contrastive positive (" + std::to_string(a.doc) + ", " +
                           std::to_string(pos) + ") has non-positive label similarity " +
                           std::to_string(weight));
      term_sum += -(std::log(weight) + sim(a.doc, pos) - log_denom);
      ++n_terms;
    }
    ++n_anchors;
  }
  if (anchors_used != nullptr) *anchors_used = n_anchors;
  if (skipped != nullptr) *skipped = n_skipped;
  if (n_anchors == 0) return 0.0;
  const uint64_t divisor =
      cfg.positive_reduction == PositiveReduction::mean ? n_terms : n_anchors;
  return term_sum / static_cast<double>(divisor);
}

template <typename SimFn>
LossReport total_loss(const PairBatch& batch, SimFn&& sim, const LossConfig& cfg) {
  LossReport report;
  if (!cfg.use_mse && !cfg.use_con)
    std::cerr << "warning: both loss terms disabled; total loss is identically zero\n";
  report.l_mse = loss_mse(batch, sim, &report.mse_pairs_used);
  report.l_con = loss_con(batch, sim, cfg, &report.con_anchors_used, &report.skipped_anchors);
  report.total = (cfg.use_mse ? report.l_mse : 0.0) + cfg.lambda * (cfg.use_con ? report.l_con : 0.0);
  return report;
}

inline LossReport total_loss(const PairBatch& batch, const BatchForward& fwd,
                             const LossConfig& cfg) {
  return total_loss(batch, [&](uint32_t a, uint32_t b) { return fwd.sim(a, b); }, cfg);
}

struct GradientSet {
  EncoderMode mode = EncoderMode::lora;
  Matrix lora_down_grad;   // d total / d A
  Matrix lora_up_grad;     // d total / d B
  Matrix projection_grad;  // d total / d W (full mode)

  bool all_zero() const {
    auto zero = [](const Matrix& m) {
      for (double v : m.values())
        if (v != 0.0) return false;
      return true;
    };
    return zero(lora_down_grad) && zero(lora_up_grad) && zero(projection_grad);
  }
};

// Exact gradients of total_loss with respect to the trainable tensors,
// chained through cosine similarity, L2 normalization, the adapted linear
// projection, and mean pooling. Degenerate (fallback) embeddings are
// constants and contribute nothing.
inline GradientSet backward(const PairBatch& batch, const BatchForward& fwd,
                            const EncoderParams& params, const LossConfig& cfg) {
  const EncoderConfig& ec = params.config;
  GradientSet grads;
  grads.mode = ec.mode;
  if (ec.mode == EncoderMode::lora) {
    grads.lora_down_grad = Matrix(ec.lora_rank, ec.hidden_dim);
    grads.lora_up_grad = Matrix(ec.out_dim, ec.lora_rank);
  } else {
    grads.projection_grad = Matrix(ec.out_dim, ec.hidden_dim);
  }

  // d total / d sim(a, b), accumulated pairwise.
  std::map<uint32_t, std::vector<double>> unit_grad;
  auto ensure = [&](uint32_t doc) -> std::vector<double>& {
    auto it = unit_grad.find(doc);
    if (it == unit_grad.end())
      it = unit_grad.emplace(doc, std::vector<double>(ec.out_dim, 0.0)).first;
    return it->second;
  };
  auto add_sim_grad = [&](uint32_t a, uint32_t b, double g) {
    if (!std::isfinite(g))
      throw NumericError("non-finite similarity gradient for pair (" + std::to_string(a) + ", " +
                         std::to_string(b) + ")");
    const auto ha = fwd.unit(a);
    const auto hb = fwd.unit(b);
    auto& ga = ensure(a);
    auto& gb = ensure(b);
    for (uint32_t r = 0; r < ec.out_dim; ++r) {
      ga[r] += g * hb[r];
      gb[r] += g * ha[r];
    }
  };

  if (cfg.use_mse) {
    for (const ScoredPair& p : detail::batch_mse_pairs(batch)) {
      add_sim_grad(p.i, p.j, 2.0 * (fwd.sim(p.i, p.j) - p.sim));
    }
  }

  if (cfg.use_con) {
    // First pass sizes the reduction, second accumulates.
    uint64_t n_terms = 0, n_anchors = 0;
    for (const BatchAnchor& a : batch.anchors) {
      if (a.positives.empty() || a.negatives.empty()) continue;
      ++n_anchors;
      n_terms += a.positives.size();
    }
    if (n_anchors > 0) {
      const double lam = cfg.lambda;
      for (const BatchAnchor& a : batch.anchors) {
        if (a.positives.empty() || a.negatives.empty()) continue;
        const double reduction =
            cfg.positive_reduction == PositiveReduction::mean
                ? 1.0 / static_cast<double>(n_terms)
                : 1.0 / static_cast<double>(n_anchors);
        double denom = 0.0;
        std::vector<double> exps(a.negatives.size());
        for (size_t k = 0; k < a.negatives.size(); ++k) {
          exps[k] = std::exp(fwd.sim(a.doc, a.negatives[k]));
          denom += exps[k];
        }
        for (const auto& [pos, weight] : a.positives) {
          (void)weight;
          add_sim_grad(a.doc, pos, -lam * reduction);
          for (size_t k = 0; k < a.negatives.size(); ++k) {
            add_sim_grad(a.doc, a.negatives[k], lam * reduction * exps[k] / denom);
          }
        }
      }
    }
  }

  // Backprop each document's unit-embedding gradient through normalization
  // and the projection. dz = (g - (g.h) h) / ||z||; the pooled input is the
  // outer-product partner for every weight gradient.
  for (const auto& [doc, g] : unit_grad) {
    const EncodeTrace& t = fwd.trace(doc);
    if (t.degenerate) continue;
    const double gh = dot(g, t.unit);
    std::vector<double> dz(ec.out_dim);
    for (uint32_t r = 0; r < ec.out_dim; ++r)
      dz[r] = (g[r] - gh * t.unit[r]) / t.projected_norm;
    if (ec.mode == EncoderMode::lora) {
      // z = W x + B (A x):  dB += dz (A x)^T,  dA += (B^T dz) x^T
      const std::vector<double> down = matvec(params.lora_down, t.pooled);
      add_scaled_outer(grads.lora_up_grad, dz, down);
      const std::vector<double> up_t_dz = matvec_transposed(params.lora_up, dz);
      add_scaled_outer(grads.lora_down_grad, up_t_dz, t.pooled);
    } else {
      add_scaled_outer(grads.projection_grad, dz, t.pooled);
    }
  }

  if (!grads.lora_down_grad.all_finite() || !grads.lora_up_grad.all_finite() ||
      !grads.projection_grad.all_finite())
    throw NumericError("non-finite gradient after accumulation");
  return grads;
}

inline GradientSet backward(const PairBatch& batch,
                            const std::vector<std::vector<uint32_t>>& doc_tokens,
                            const EncoderParams& params, const LossConfig& cfg) {
  const BatchForward fwd = BatchForward::run(batch, doc_tokens, params);
  return backward(batch, fwd, params, cfg);
}

namespace detail {

inline std::vector<Matrix*> trainable_tensors(EncoderParams& p) {
  if (p.config.mode == EncoderMode::lora) return {&p.lora_down, &p.lora_up};
  return {&p.projection};
}

inline std::vector<const Matrix*> trainable_tensors(const EncoderParams& p) {
  if (p.config.mode == EncoderMode::lora) return {&p.lora_down, &p.lora_up};
  return {&p.projection};
}

inline std::vector<const Matrix*> gradient_tensors(const GradientSet& g) {
  if (g.mode == EncoderMode::lora) return {&g.lora_down_grad, &g.lora_up_grad};
  return {&g.projection_grad};
}

}  // namespace detail

struct FiniteDiffResult {
  double max_relative_error = 0.0;
  uint64_t coordinates_checked = 0;
};

// Central finite differences on sampled trainable coordinates, against the
// analytic gradient. Relative error uses max(|g_a|, |g_fd|, 1e-8) in the
// denominator.
inline FiniteDiffResult finite_diff_check(const PairBatch& batch,
                                          const std::vector<std::vector<uint32_t>>& doc_tokens,
                                          const EncoderParams& params, const LossConfig& cfg,
                                          double epsilon = 1e-4, uint64_t n_coordinates = 50,
                                          uint64_t seed = 0) {
  if (epsilon < 1e-7 || epsilon > 1e-2)
    throw ConfigError("finite difference epsilon must be in [1e-7, 1e-2]");

  const GradientSet analytic = backward(batch, doc_tokens, params, cfg);
  const auto grad_tensors = detail::gradient_tensors(analytic);

  EncoderParams work = params;
  const auto tensors = detail::trainable_tensors(work);
  size_t total = 0;
  for (const Matrix* m : tensors) total += m->size();
  if (total == 0) throw ConfigError("no trainable coordinates to check");

  auto loss_at = [&]() {
    const BatchForward fwd = BatchForward::run(batch, doc_tokens, work);
    return total_loss(batch, fwd, cfg).total;
  };

  Rng rng(seed);
  FiniteDiffResult result;
  const uint64_t n = std::min<uint64_t>(n_coordinates, total);
  for (uint64_t k = 0; k < n; ++k) {
    const size_t flat = static_cast<size_t>(rng.below(total));
    size_t tensor_idx = 0, offset = flat;
    while (offset >= tensors[tensor_idx]->size()) {
      offset -= tensors[tensor_idx]->size();
      ++tensor_idx;
    }
    double& coord = tensors[tensor_idx]->at_flat(offset);
    const double original = coord;
    coord = original + epsilon;
    const double plus = loss_at();
    coord = original - epsilon;
    const double minus = loss_at();
    coord = original;
    const double fd = (plus - minus) / (2.0 * epsilon);
    const double ga = grad_tensors[tensor_idx]->at_flat(offset);
    const double rel = std::abs(ga - fd) / std::max({std::abs(ga), std::abs(fd), 1e-8});
    result.max_relative_error = std::max(result.max_relative_error, rel);
    ++result.coordinates_checked;
  }
  return result;
}

}  // namespace hicl
