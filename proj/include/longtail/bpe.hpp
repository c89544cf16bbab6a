#pragma once

#include "longtail/corpus.hpp"
#include "longtail/types.hpp"

#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace longtail {

/// Learned byte-pair-encoding codec. Words are segmented by replaying the
/// merges in learned order over their character symbols; word-internal pieces
/// carry a trailing continuation marker ("@@") so the segmentation is
/// reversible.
struct BpeCodec {
  std::vector<std::pair<std::string, std::string>> merges;
  Vocabulary vocab;
  std::string marker = "@@";

  std::size_t num_merges() const { return merges.size(); }

  // Every codepoint occurring in the vocabulary or in a merge. Built lazily;
  // invalidated by mutating merges or vocab after first use.
  const std::unordered_set<std::string>& char_alphabet() const;

  // "bpe-v1 <num_merges>" header, then one "left right" merge per line.
  void save(const std::string& path) const;
  static BpeCodec load(const std::string& path);

 private:
  mutable std::unordered_set<std::string> alphabet_;
};

struct MergeResult {
  Sentence words;
  bool dangling = false;  // sequence ended on a continuation piece
};

// Learns merges jointly over both corpus sides. The most frequent adjacent
// symbol pair wins each round; equal counts break by lexicographic order of
// the pair. Stops early when no pair occurs twice. The codec's vocabulary is
// built from the encoded training corpus.
BpeCodec learn_bpe(const ParallelCorpus& corpus, int num_merges);

// Segments each word of the sentence by replaying the codec's merges.
// Characters outside the learned alphabet become the unk token.
Sentence apply_bpe(const BpeCodec& codec, const Sentence& sentence);

Sentence apply_bpe_word(const BpeCodec& codec, const std::string& word);

// Joins continuation-marked pieces back into words. Inverse of apply_bpe over
// the training alphabet.
MergeResult merge_bpe(const Sentence& tokens, const std::string& marker = "@@");

ParallelCorpus apply_bpe(const BpeCodec& codec, const ParallelCorpus& corpus);

}  // namespace longtail
