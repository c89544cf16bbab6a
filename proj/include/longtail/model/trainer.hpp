#pragma once

#include "longtail/losses.hpp"
#include "longtail/model/adam.hpp"
#include "longtail/model/transformer.hpp"
#include "longtail/types.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace longtail {

struct TrainConfig {
  OptimizerConfig optimizer;
  LossConfig loss;
  int max_updates = 3000;
  int batch_tokens = 512;  // target predicted tokens per update
  std::uint64_t seed = 1;
  int log_every = 100;

  void validate() const {
    optimizer.validate();
    loss.validate();
    if (max_updates < 1) throw std::invalid_argument("train: max_updates must be >= 1");
    if (batch_tokens < 1) throw std::invalid_argument("train: batch_tokens must be >= 1");
    if (log_every < 1) throw std::invalid_argument("train: log_every must be >= 1");
  }
};

struct TrainLogEntry {
  std::int64_t step = 0;
  double loss_per_token = 0.0;
  double learning_rate = 0.0;
  double valid_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  std::vector<TrainLogEntry> log;
  double final_loss = 0.0;
  std::int64_t steps = 0;
};

/// Deterministic training loop: a seeded shuffle feeds sentence pairs into
/// token-budgeted batches, gradients are averaged per predicted token, and
/// one Adam step follows per batch. Loss curves are bit-identical per seed.
template <typename S>
TrainResult train_loop(Transformer<S>& model, const IdPairs& pairs, const TrainConfig& cfg,
                       std::ostream* log_stream = nullptr,
                       const IdPairs* valid = nullptr,
                       const std::function<void(const TrainLogEntry&)>& on_log = {}) {
  cfg.validate();
  if (pairs.empty()) throw std::invalid_argument("train: empty corpus");

  auto valid_loss = [&]() {
    if (!valid || valid->empty()) return std::numeric_limits<double>::quiet_NaN();
    double sum = 0.0;
    std::int64_t tokens = 0;
    for (const auto& [src, tgt] : *valid)
      sum += static_cast<double>(model.evaluate_loss(src, tgt, cfg.loss, &tokens));
    return sum / static_cast<double>(tokens);
  };

  AdamOptimizer<S> opt(cfg.optimizer);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();  // forces a shuffle before the first batch

  auto reshuffle = [&]() {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
      std::swap(order[i], order[j]);
    }
    cursor = 0;
  };

  TrainResult result;
  for (std::int64_t step = 1; step <= cfg.max_updates; ++step) {
    ModelParams<S> grads = zeros_like(model.params());
    std::int64_t tokens = 0;
    double loss_sum = 0.0;
    while (tokens < cfg.batch_tokens) {
      if (cursor == order.size()) reshuffle();
      const auto& [src, tgt] = pairs[order[cursor++]];
      loss_sum +=
          static_cast<double>(model.accumulate_gradients(src, tgt, cfg.loss, grads, &rng, &tokens));
    }

    const S inv_tokens = static_cast<S>(1.0 / static_cast<double>(tokens));
    for (auto& [name, mat] : tensor_list(grads)) *mat *= inv_tokens;
    opt.step(model.params(), grads);

    result.final_loss = loss_sum / static_cast<double>(tokens);
    result.steps = step;
    if (step % cfg.log_every == 0 || step == cfg.max_updates || step == 1) {
      TrainLogEntry entry{step, result.final_loss, learning_rate_at(cfg.optimizer, step),
                          valid_loss()};
      result.log.push_back(entry);
      if (on_log) on_log(entry);
      if (log_stream)
        (*log_stream) << "step " << entry.step << " loss/token " << entry.loss_per_token
                      << " lr " << entry.learning_rate << '\n';
    }
  }
  return result;
}

}  // namespace longtail
