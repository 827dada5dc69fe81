#pragma once

// Decoupled-weight-decay Adam over the trainable tensors of an encoder.
// Moments are kept per tensor and the decay is applied to the pre-update
// parameter value, outside the adaptive term.

#include <cmath>
#include <cstdint>
#include <vector>

#include "hicl/objective.hpp"

namespace hicl {

struct AdamWConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;

  void validate() const {
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0) throw ConfigError("beta1 must be in [0, 1)");
    if (beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("beta2 must be in [0, 1)");
    if (epsilon <= 0.0) throw ConfigError("epsilon must be positive");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  }
};

class AdamW {
 public:
  AdamW(const AdamWConfig& cfg, const EncoderParams& params) : cfg_(cfg) {
    cfg_.validate();
    for (const Matrix* m : detail::trainable_tensors(params)) {
      first_moments_.emplace_back(m->rows(), m->cols());
      second_moments_.emplace_back(m->rows(), m->cols());
    }
  }

  uint64_t steps() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }

  void step(EncoderParams& params, const GradientSet& grads) {
    if (grads.mode != params.config.mode)
      throw ConfigError("gradient mode does not match encoder mode");
    const auto tensors = detail::trainable_tensors(params);
    const auto grad_tensors = detail::gradient_tensors(grads);
    if (tensors.size() != first_moments_.size())
      throw ConfigError("optimizer state does not match encoder parameters");

    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (size_t t = 0; t < tensors.size(); ++t) {
      Matrix& theta = *tensors[t];
      const Matrix& g = *grad_tensors[t];
      Matrix& m = first_moments_[t];
      Matrix& v = second_moments_[t];
      if (!theta.same_shape(g) || !theta.same_shape(m))
        throw ConfigError("gradient shape does not match parameter shape");
      for (size_t i = 0; i < theta.size(); ++i) {
        const double gi = g.at_flat(i);
        if (!std::isfinite(gi)) throw NumericError("non-finite gradient entry in optimizer step");
        m.at_flat(i) = cfg_.beta1 * m.at_flat(i) + (1.0 - cfg_.beta1) * gi;
        v.at_flat(i) = cfg_.beta2 * v.at_flat(i) + (1.0 - cfg_.beta2) * gi * gi;
        const double m_hat = m.at_flat(i) / bc1;
        const double v_hat = v.at_flat(i) / bc2;
        const double old = theta.at_flat(i);
        theta.at_flat(i) =
            old - cfg_.learning_rate * (m_hat / (std::sqrt(v_hat) + cfg_.epsilon) +
                                        cfg_.weight_decay * old);
        if (!std::isfinite(theta.at_flat(i)))
          throw NumericError("non-finite parameter after optimizer step");
      }
    }
  }

 private:
  AdamWConfig cfg_;
  uint64_t step_ = 0;
  std::vector<Matrix> first_moments_;
  std::vector<Matrix> second_moments_;
};

}  // namespace hicl
