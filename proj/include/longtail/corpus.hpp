#pragma once

#include "longtail/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace longtail {

/// Bijective token <-> id map with the four reserved specials at ids 0..3.
class Vocabulary {
 public:
  Vocabulary();

  // Adds a token (with an optional training count) and returns its id.
  // Re-adding an existing token accumulates the count.
  TokenId add(const std::string& token, Count count = 0);

  bool contains(const std::string& token) const;
  // Unknown tokens resolve to Specials::unk.
  TokenId id_of(const std::string& token) const;
  const std::string& token_of(TokenId id) const;
  Count count_of(TokenId id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  IdSequence encode(const Sentence& sentence) const;
  Sentence decode(const IdSequence& ids) const;

  // One "token<TAB>count" per line, specials first, then descending count.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::vector<Count> counts_;
  std::unordered_map<std::string, TokenId> ids_;
};

struct ParallelCorpus {
  std::vector<std::pair<Sentence, Sentence>> pairs;
  std::string name;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

/// Token type -> training-corpus occurrence count. Unseen tokens query as 0.
class FrequencyTable {
 public:
  void add(const std::string& token, Count n = 1);
  Count count(const std::string& token) const;
  Count total() const { return total_; }
  std::size_t num_types() const { return counts_.size(); }

  const std::unordered_map<std::string, Count>& counts() const { return counts_; }

  // Same line format as the vocabulary file: "token<TAB>count", descending.
  void save(const std::string& path) const;
  static FrequencyTable load(const std::string& path);

 private:
  std::unordered_map<std::string, Count> counts_;
  Count total_ = 0;
};

struct SentenceScore {
  std::size_t sentence_index = 0;
  double f_s = 0.0;  // average training frequency of the sentence's tokens
  std::size_t length = 0;
};

enum class CorpusSide { kSource, kTarget };

// ---- Operations -----------------------------------------------------------

// Reads a sentence-aligned pair of UTF-8 text files (one sentence per line,
// whitespace-pre-tokenized). Throws on line-count mismatch or unreadable files.
ParallelCorpus load_parallel(const std::string& source_path,
                             const std::string& target_path,
                             const std::string& name = "");

// Inverse of load_parallel; one space-joined sentence per line.
void save_parallel(const ParallelCorpus& corpus, const std::string& source_path,
                   const std::string& target_path);

void save_sentences(const std::vector<Sentence>& sentences, const std::string& path);
std::vector<Sentence> load_sentences(const std::string& path);

FrequencyTable build_frequency_table(const ParallelCorpus& corpus, CorpusSide side);

// Average training frequency of the sentence's tokens (F_S). Errors on an
// empty sentence.
double frequency_score(const Sentence& sentence, const FrequencyTable& table);

SentenceScore score_sentence(std::size_t index, const Sentence& sentence,
                             const FrequencyTable& table);

// Sorts sentences by descending F_S of the source side (ties by original
// index) and cuts the result into k contiguous parts whose sizes differ by at
// most one, larger parts first. Mean F_S is non-increasing across parts.
std::vector<ParallelCorpus> split_by_frequency_score(const ParallelCorpus& corpus,
                                                     const FrequencyTable& table,
                                                     int k);

// Synthetic translation task: source tokens are drawn i.i.d. from a Zipf
// distribution with the given exponent over vocab_size types; the target is a
// fixed seeded bijective re-labeling of the source. Reproducible per seed.
ParallelCorpus generate_zipf_task(int vocab_size, int num_pairs, double zipf_exponent,
                                  int max_len, std::uint64_t seed);

}  // namespace longtail
