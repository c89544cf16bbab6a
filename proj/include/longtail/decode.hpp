#pragma once

#include "longtail/losses.hpp"
#include "longtail/model/transformer.hpp"
#include "longtail/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace longtail {

/// One decoded candidate. `tokens` excludes the bos prompt and includes the
/// closing eos when the search terminated; `positional` holds the model
/// probability of each emitted token (eos included), which is what the
/// frequency diagnostics consume later. Scores accumulate in double no
/// matter the model scalar.
struct Hypothesis {
  IdSequence tokens;
  std::vector<double> positional;
  double log_score = 0.0;
  bool terminated = false;
};

struct DecodeConfig {
  int beam_size = 5;
  int max_len = 64;
  double length_penalty = 1.0;

  void validate() const {
    if (beam_size < 1) throw std::invalid_argument("decode: beam_size must be >= 1");
    if (max_len < 1) throw std::invalid_argument("decode: max_len must be >= 1");
    if (length_penalty < 0.0)
      throw std::invalid_argument("decode: length_penalty must be >= 0");
  }
};

/// Length-normalized score used for the final ranking: log p / len^penalty.
inline double normalized_score(const Hypothesis& hyp, double length_penalty) {
  auto len = static_cast<double>(std::max<std::size_t>(hyp.tokens.size(), 1));
  return hyp.log_score / std::pow(len, length_penalty);
}

namespace detail {

template <typename S>
Vec<double> next_token_probs(const Transformer<S>& model, const Mat<S>& enc_out,
                             const IdSequence& prefix) {
  Vec<S> logits = model.next_logits(enc_out, prefix);
  return softmax(logits.template cast<double>());
}

inline bool lex_less(const IdSequence& a, const IdSequence& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace detail

/// Picks the argmax token at every step (lowest id on exact ties) until eos
/// or `max_len` emitted tokens.
template <typename S>
Hypothesis greedy_decode(const Transformer<S>& model, const IdSequence& src,
                         int max_len) {
  if (max_len < 1) throw std::invalid_argument("decode: max_len must be >= 1");
  Mat<S> enc_out = model.encode(src);
  Hypothesis hyp;
  while (static_cast<int>(hyp.tokens.size()) < max_len) {
    Vec<double> probs = detail::next_token_probs(model, enc_out, hyp.tokens);
    Eigen::Index best = 0;
    probs.maxCoeff(&best);
    auto tok = static_cast<TokenId>(best);
    hyp.tokens.push_back(tok);
    hyp.positional.push_back(probs(best));
    hyp.log_score += std::log(probs(best));
    if (tok == Specials::eos) {
      hyp.terminated = true;
      break;
    }
  }
  return hyp;
}

/// Standard beam search. Candidates are ranked by raw log score while the
/// beam is live (ties broken toward the lexicographically smallest token
/// sequence); picking eos retires a candidate into the finished pool. The
/// search stops once no live candidate could still beat the best finished
/// score even with free extensions, or at `max_len`, where survivors join
/// the pool unterminated. The returned list is sorted by the
/// length-normalized score, best first.
template <typename S>
std::vector<Hypothesis> beam_decode(const Transformer<S>& model,
                                    const IdSequence& src,
                                    const DecodeConfig& cfg) {
  cfg.validate();
  Mat<S> enc_out = model.encode(src);

  std::vector<Hypothesis> live(1);
  std::vector<Hypothesis> finished;
  double max_len_pow = std::pow(static_cast<double>(cfg.max_len), cfg.length_penalty);

  auto best_finished = [&]() {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& hyp : finished)
      best = std::max(best, normalized_score(hyp, cfg.length_penalty));
    return best;
  };

  for (int step = 0; step < cfg.max_len && !live.empty(); ++step) {
    if (!finished.empty()) {
      double bar = best_finished();
      bool any_contender = false;
      for (const auto& hyp : live)
        if (hyp.log_score / max_len_pow > bar) {
          any_contender = true;
          break;
        }
      if (!any_contender) {
        live.clear();
        break;
      }
    }

    std::vector<Hypothesis> candidates;
    candidates.reserve(live.size() * static_cast<std::size_t>(model.config().vocab_size));
    for (const auto& hyp : live) {
      Vec<double> probs = detail::next_token_probs(model, enc_out, hyp.tokens);
      for (Eigen::Index tok = 0; tok < probs.size(); ++tok) {
        Hypothesis next = hyp;
        next.tokens.push_back(static_cast<TokenId>(tok));
        next.positional.push_back(probs(tok));
        next.log_score += std::log(probs(tok));
        next.terminated = tok == Specials::eos;
        candidates.push_back(std::move(next));
      }
    }

    std::sort(candidates.begin(), candidates.end(),
              [](const Hypothesis& a, const Hypothesis& b) {
                if (a.log_score != b.log_score) return a.log_score > b.log_score;
                return detail::lex_less(a.tokens, b.tokens);
              });
    if (candidates.size() > static_cast<std::size_t>(cfg.beam_size))
      candidates.resize(static_cast<std::size_t>(cfg.beam_size));

    live.clear();
    for (auto& cand : candidates) {
      if (cand.terminated)
        finished.push_back(std::move(cand));
      else
        live.push_back(std::move(cand));
    }
  }

  std::vector<Hypothesis> pool = std::move(finished);
  for (auto& hyp : live) pool.push_back(std::move(hyp));
  std::sort(pool.begin(), pool.end(), [&](const Hypothesis& a, const Hypothesis& b) {
    double sa = normalized_score(a, cfg.length_penalty);
    double sb = normalized_score(b, cfg.length_penalty);
    if (sa != sb) return sa > sb;
    return detail::lex_less(a.tokens, b.tokens);
  });
  return pool;
}

/// Scores every token sequence up to `max_len` by depth-first enumeration
/// and returns the one with the best length-normalized score (first found
/// in ascending token order on exact ties, i.e. the lexicographically
/// smallest). Feasible only for toy vocabularies; the size guard rejects
/// anything past ~1e7 sequences.
template <typename S>
Hypothesis exhaustive_decode(const Transformer<S>& model, const IdSequence& src,
                             int max_len, double length_penalty = 1.0) {
  if (max_len < 1) throw std::invalid_argument("decode: max_len must be >= 1");
  if (length_penalty < 0.0)
    throw std::invalid_argument("decode: length_penalty must be >= 0");
  double sequences = std::pow(static_cast<double>(model.config().vocab_size),
                              static_cast<double>(max_len));
  if (sequences > 1e7)
    throw std::invalid_argument("decode: vocab_size^max_len too large to enumerate");

  Mat<S> enc_out = model.encode(src);
  Hypothesis best;
  bool have_best = false;

  Hypothesis cur;
  auto consider = [&](const Hypothesis& hyp) {
    if (!have_best || normalized_score(hyp, length_penalty) >
                          normalized_score(best, length_penalty)) {
      best = hyp;
      have_best = true;
    }
  };

  auto dfs = [&](auto&& self) -> void {
    if (static_cast<int>(cur.tokens.size()) == max_len) {
      consider(cur);
      return;
    }
    Vec<double> probs = detail::next_token_probs(model, enc_out, cur.tokens);
    double saved_score = cur.log_score;
    for (Eigen::Index tok = 0; tok < probs.size(); ++tok) {
      cur.tokens.push_back(static_cast<TokenId>(tok));
      cur.positional.push_back(probs(tok));
      cur.log_score = saved_score + std::log(probs(tok));
      cur.terminated = tok == Specials::eos;
      if (cur.terminated)
        consider(cur);
      else
        self(self);
      cur.tokens.pop_back();
      cur.positional.pop_back();
      cur.log_score = saved_score;
      cur.terminated = false;
    }
  };
  dfs(dfs);
  return best;
}

}  // namespace longtail
