#pragma once

#include "longtail/types.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace longtail {

/// Token-level losses over a predicted distribution p and gold class t:
///   cross-entropy        -log p_t
///   label-smoothed CE    -sum_j q_j log p_j,  q = (1-eps) onehot + eps/V
///   focal                -(1 - p_t)^gamma log p_t
///   generalized focal    -(1 + alpha p_t)^gamma log p_t
/// alpha = -1 recovers focal, gamma = 0 recovers cross-entropy; alpha > 0
/// up-weights confident tokens (anti-focal).
enum class LossKind { kCrossEntropy, kLabelSmoothedCE, kFocal, kGeneralizedFocal };

struct LossConfig {
  LossKind kind = LossKind::kCrossEntropy;
  double gamma = 1.0;    // focal / generalized-focal exponent
  double alpha = 1.0;    // generalized-focal modulation slope
  double epsilon = 0.1;  // label-smoothing mass

  void validate() const {
    if (gamma < 0.0) throw std::invalid_argument("loss: gamma must be >= 0");
    if (epsilon < 0.0 || epsilon >= 1.0)
      throw std::invalid_argument("loss: epsilon must be in [0, 1)");
  }
};

inline LossKind loss_kind_from_string(const std::string& name) {
  if (name == "ce" || name == "cross-entropy") return LossKind::kCrossEntropy;
  if (name == "ls-ce" || name == "label-smoothed-ce") return LossKind::kLabelSmoothedCE;
  if (name == "focal") return LossKind::kFocal;
  if (name == "gfl" || name == "generalized-focal") return LossKind::kGeneralizedFocal;
  throw std::invalid_argument("unknown loss kind: " + name);
}

inline std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy: return "ce";
    case LossKind::kLabelSmoothedCE: return "ls-ce";
    case LossKind::kFocal: return "focal";
    case LossKind::kGeneralizedFocal: return "gfl";
  }
  throw std::invalid_argument("unknown loss kind");
}

// Probabilities are floored here before any log.
inline constexpr double kProbFloor = 1e-12;

/// Numerically stable softmax of a logit vector.
template <typename Derived>
Vec<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using S = typename Derived::Scalar;
  if (logits.size() == 0) throw std::invalid_argument("softmax: empty logits");
  Vec<S> p = (logits.array() - logits.maxCoeff()).exp();
  p /= p.sum();
  return p;
}

/// Shannon entropy of a distribution, in nats. Zero entries contribute zero.
template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& probs) {
  using S = typename Derived::Scalar;
  S h = S(0);
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    S p = probs(i);
    if (p > S(0)) h -= p * std::log(p);
  }
  return h;
}

namespace detail {

// Modulating factor (1 + alpha p)^gamma and the loss family's derivative
// with respect to p_t. Cross-entropy is alpha irrelevant, gamma = 0.
inline double modulation(double alpha, double gamma, double p) {
  return std::pow(1.0 + alpha * p, gamma);
}

}  // namespace detail

/// Loss at a given correct-class probability, for losses that are a pure
/// function of p_t. Label-smoothed CE depends on the whole distribution and
/// is rejected.
inline double point_loss(const LossConfig& cfg, double p) {
  cfg.validate();
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("point_loss: p must be in [0, 1]");
  if (cfg.kind == LossKind::kLabelSmoothedCE)
    throw std::invalid_argument("point_loss: label-smoothed CE needs the full distribution");
  double logp = std::log(std::max(p, kProbFloor));
  switch (cfg.kind) {
    case LossKind::kCrossEntropy: return -logp;
    case LossKind::kFocal: return -detail::modulation(-1.0, cfg.gamma, p) * logp;
    case LossKind::kGeneralizedFocal: return -detail::modulation(cfg.alpha, cfg.gamma, p) * logp;
    default: throw std::invalid_argument("point_loss: unsupported loss kind");
  }
}

/// loss(p_low) / loss(p_high): how much more a loss penalizes an uncertain
/// token than a confident one.
inline double relative_loss_ratio(const LossConfig& cfg, double p_low, double p_high) {
  double denom = point_loss(cfg, p_high);
  if (denom == 0.0)
    throw std::domain_error("relative_loss_ratio: loss vanishes at p_high");
  return point_loss(cfg, p_low) / denom;
}

template <typename S>
struct TokenLoss {
  S loss = S(0);
  Vec<S> dlogits;
};

/// Loss and analytic d loss / d logits for one position.
template <typename S>
TokenLoss<S> token_loss(const LossConfig& cfg, const Vec<S>& logits, TokenId target) {
  cfg.validate();
  const Eigen::Index v = logits.size();
  if (target < 0 || target >= v)
    throw std::out_of_range("token_loss: target " + std::to_string(target) +
                            " outside vocabulary of " + std::to_string(v));

  Vec<S> p = softmax(logits);
  TokenLoss<S> out;

  if (cfg.kind == LossKind::kCrossEntropy || cfg.kind == LossKind::kLabelSmoothedCE) {
    double eps = cfg.kind == LossKind::kCrossEntropy ? 0.0 : cfg.epsilon;
    double uniform = eps / static_cast<double>(v);
    double loss = 0.0;
    if (eps > 0.0) {
      for (Eigen::Index j = 0; j < v; ++j)
        loss -= uniform * std::log(std::max(static_cast<double>(p(j)), kProbFloor));
    }
    loss -= (1.0 - eps) * std::log(std::max(static_cast<double>(p(target)), kProbFloor));
    out.loss = static_cast<S>(loss);
    out.dlogits = p;
    out.dlogits.array() -= static_cast<S>(uniform);
    out.dlogits(target) -= static_cast<S>(1.0 - eps);
    return out;
  }

  const double alpha = cfg.kind == LossKind::kFocal ? -1.0 : cfg.alpha;
  const double pt = std::max(static_cast<double>(p(target)), kProbFloor);
  const double logp = std::log(pt);
  const double mod = detail::modulation(alpha, cfg.gamma, pt);
  out.loss = static_cast<S>(-mod * logp);
  // dL/dp_t = -(gamma alpha (1+alpha p)^(gamma-1) log p + (1+alpha p)^gamma / p)
  const double dldp =
      -(cfg.gamma * alpha * detail::modulation(alpha, cfg.gamma - 1.0, pt) * logp + mod / pt);
  // dp_t/dz_j = p_t (delta_tj - p_j)
  out.dlogits = p * static_cast<S>(-dldp * pt);
  out.dlogits(target) += static_cast<S>(dldp * pt);
  return out;
}

template <typename S>
struct SequenceLossResult {
  S loss = S(0);           // summed over positions
  Mat<S> dlogits;          // same shape as the logits
  std::int64_t tokens = 0;
};

/// Summed loss over a sequence. logits holds one position per row; targets
/// supplies the gold class of each row.
template <typename S>
SequenceLossResult<S> sequence_loss(const LossConfig& cfg, const Mat<S>& logits,
                                    const IdSequence& targets) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size())
    throw std::invalid_argument("sequence_loss: " + std::to_string(logits.rows()) +
                                " logit rows vs " + std::to_string(targets.size()) + " targets");
  SequenceLossResult<S> out;
  out.dlogits.setZero(logits.rows(), logits.cols());
  out.tokens = static_cast<std::int64_t>(targets.size());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    TokenLoss<S> tl = token_loss<S>(cfg, logits.row(t).transpose(), targets[t]);
    out.loss += tl.loss;
    out.dlogits.row(t) = tl.dlogits.transpose();
  }
  return out;
}

}  // namespace longtail
