#pragma once

#include "longtail/model/params.hpp"
#include "longtail/types.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace longtail {

struct OptimizerConfig {
  double learning_rate = 5e-4;  // peak rate, reached at the end of warmup
  int warmup_steps = 400;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;

  void validate() const {
    if (learning_rate < 0.0) throw std::invalid_argument("optimizer: learning_rate must be >= 0");
    if (warmup_steps < 1) throw std::invalid_argument("optimizer: warmup_steps must be >= 1");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
      throw std::invalid_argument("optimizer: betas must be in [0, 1)");
  }
};

/// Linear warmup to the peak rate, then inverse square root decay:
/// lr(step) = peak * min(step / warmup, sqrt(warmup / step)).
inline double learning_rate_at(const OptimizerConfig& cfg, std::int64_t step) {
  cfg.validate();
  if (step < 1) throw std::invalid_argument("optimizer: steps count from 1");
  double s = static_cast<double>(step);
  double w = static_cast<double>(cfg.warmup_steps);
  return cfg.learning_rate * std::min(s / w, std::sqrt(w / s));
}

/// Adam with bias correction. Moment slots follow the tensor_list order of
/// the first step call.
template <typename S>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  std::int64_t steps_taken() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }

  /// One update from already averaged gradients. A zero learning rate must
  /// leave the parameters bit-identical, so the scaled step is skipped
  /// entirely when it vanishes.
  void step(ModelParams<S>& params, const ModelParams<S>& grads) {
    auto ps = tensor_list(params);
    auto gs = tensor_list(const_cast<ModelParams<S>&>(grads));
    if (ps.size() != gs.size())
      throw std::invalid_argument("adam: parameter and gradient trees differ");

    if (m_.empty()) {
      m_.reserve(ps.size());
      v_.reserve(ps.size());
      for (auto& [name, mat] : ps) {
        m_.push_back(Mat<S>::Zero(mat->rows(), mat->cols()));
        v_.push_back(Mat<S>::Zero(mat->rows(), mat->cols()));
      }
    } else if (m_.size() != ps.size()) {
      throw std::invalid_argument("adam: parameter tree changed between steps");
    }

    ++t_;
    const double lr = learning_rate_at(cfg_, t_);
    const S b1 = static_cast<S>(cfg_.beta1), b2 = static_cast<S>(cfg_.beta2);
    const double corr1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double corr2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const S scale = static_cast<S>(lr / corr1);
    const S inv_sqrt_corr2 = static_cast<S>(1.0 / std::sqrt(corr2));
    const S eps = static_cast<S>(cfg_.eps);

    for (std::size_t i = 0; i < ps.size(); ++i) {
      Mat<S>& theta = *ps[i].second;
      const Mat<S>& g = *gs[i].second;
      if (theta.rows() != g.rows() || theta.cols() != g.cols())
        throw std::invalid_argument("adam: gradient shape mismatch at " + ps[i].first);
      m_[i] = b1 * m_[i] + (S(1) - b1) * g;
      v_[i] = (b2 * v_[i].array() + (S(1) - b2) * g.array().square()).matrix();
      if (lr == 0.0) continue;
      theta.array() -=
          scale * m_[i].array() / (v_[i].array().sqrt() * inv_sqrt_corr2 + eps);
    }
  }

 private:
  OptimizerConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Mat<S>> m_, v_;
};

}  // namespace longtail
