#include "longtail/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace longtail {

namespace {

// Splits a word into UTF-8 codepoint strings. Invalid lead bytes fall back to
// single bytes.
std::vector<std::string> utf8_chars(const std::string& word) {
  std::vector<std::string> chars;
  std::size_t i = 0;
  while (i < word.size()) {
    unsigned char c = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if ((c & 0x80u) == 0x00u) len = 1;
    else if ((c & 0xE0u) == 0xC0u) len = 2;
    else if ((c & 0xF0u) == 0xE0u) len = 3;
    else if ((c & 0xF8u) == 0xF0u) len = 4;
    if (i + len > word.size()) len = 1;
    chars.push_back(word.substr(i, len));
    i += len;
  }
  return chars;
}

using SymbolPair = std::pair<std::string, std::string>;

// One left-to-right pass replacing adjacent (a,b) with the joined symbol.
void merge_in_place(std::vector<std::string>& syms, const SymbolPair& pair) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < syms.size();) {
    if (r + 1 < syms.size() && syms[r] == pair.first && syms[r + 1] == pair.second) {
      syms[w++] = pair.first + pair.second;
      r += 2;
    } else {
      if (w != r) syms[w] = std::move(syms[r]);
      ++w;
      ++r;
    }
  }
  syms.resize(w);
}

struct WordEntry {
  std::vector<std::string> syms;
  Count count = 0;
};

}  // namespace

void BpeCodec::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "bpe-v1 " << merges.size() << '\n';
  for (const auto& [left, right] : merges) out << left << ' ' << right << '\n';
}

BpeCodec BpeCodec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("empty codec file: " + path);
  std::istringstream hs(header);
  std::string tag;
  std::size_t n = 0;
  if (!(hs >> tag >> n) || tag != "bpe-v1")
    throw std::runtime_error("bad codec header in " + path + ": " + header);
  BpeCodec codec;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto space = line.find(' ');
    if (space == std::string::npos)
      throw std::runtime_error("malformed merge line in " + path + ": " + line);
    codec.merges.emplace_back(line.substr(0, space), line.substr(space + 1));
  }
  if (codec.merges.size() != n)
    throw std::runtime_error("codec header declares " + std::to_string(n) + " merges, file has " +
                             std::to_string(codec.merges.size()));
  return codec;
}

const std::unordered_set<std::string>& BpeCodec::char_alphabet() const {
  if (alphabet_.empty()) {
    for (TokenId id = Specials::count; id < vocab.size(); ++id) {
      std::string tok = vocab.token_of(id);
      if (tok.size() > marker.size() &&
          tok.compare(tok.size() - marker.size(), marker.size(), marker) == 0)
        tok.resize(tok.size() - marker.size());
      for (auto& c : utf8_chars(tok)) alphabet_.insert(std::move(c));
    }
    for (const auto& [l, r] : merges) {
      for (auto& c : utf8_chars(l)) alphabet_.insert(std::move(c));
      for (auto& c : utf8_chars(r)) alphabet_.insert(std::move(c));
    }
  }
  return alphabet_;
}

Sentence apply_bpe_word(const BpeCodec& codec, const std::string& word) {
  const auto& alphabet = codec.char_alphabet();
  std::vector<std::string> syms;
  for (auto& c : utf8_chars(word)) {
    bool known = alphabet.count(c) > 0;
    syms.push_back(known ? std::move(c) : std::string(Specials::unk_token));
  }
  for (const auto& merge : codec.merges) merge_in_place(syms, merge);

  Sentence out;
  out.reserve(syms.size());
  for (std::size_t i = 0; i < syms.size(); ++i) {
    bool unk = syms[i] == Specials::unk_token;
    if (!unk && i + 1 < syms.size())
      out.push_back(syms[i] + codec.marker);
    else
      out.push_back(std::move(syms[i]));
  }
  return out;
}

Sentence apply_bpe(const BpeCodec& codec, const Sentence& sentence) {
  Sentence out;
  for (const auto& word : sentence) {
    auto pieces = apply_bpe_word(codec, word);
    out.insert(out.end(), std::make_move_iterator(pieces.begin()),
               std::make_move_iterator(pieces.end()));
  }
  return out;
}

ParallelCorpus apply_bpe(const BpeCodec& codec, const ParallelCorpus& corpus) {
  ParallelCorpus out;
  out.name = corpus.name + "/bpe";
  out.pairs.reserve(corpus.size());
  // Distinct words recur constantly; memoize their segmentation.
  std::unordered_map<std::string, Sentence> memo;
  auto encode = [&](const Sentence& sent) {
    Sentence enc;
    for (const auto& word : sent) {
      auto it = memo.find(word);
      if (it == memo.end()) it = memo.emplace(word, apply_bpe_word(codec, word)).first;
      enc.insert(enc.end(), it->second.begin(), it->second.end());
    }
    return enc;
  };
  for (const auto& [src, tgt] : corpus.pairs) out.pairs.emplace_back(encode(src), encode(tgt));
  return out;
}

MergeResult merge_bpe(const Sentence& tokens, const std::string& marker) {
  MergeResult result;
  std::string pending;
  bool open = false;
  for (const auto& tok : tokens) {
    bool cont = tok.size() > marker.size() &&
                tok.compare(tok.size() - marker.size(), marker.size(), marker) == 0;
    if (cont) {
      pending += tok.substr(0, tok.size() - marker.size());
      open = true;
    } else {
      result.words.push_back(pending + tok);
      pending.clear();
      open = false;
    }
  }
  if (open) {
    result.words.push_back(pending);  // dangling continuation, joined as-is
    result.dangling = true;
  }
  return result;
}

BpeCodec learn_bpe(const ParallelCorpus& corpus, int num_merges) {
  if (corpus.empty()) throw std::invalid_argument("learn_bpe: empty corpus");
  if (num_merges < 0) throw std::invalid_argument("learn_bpe: num_merges must be >= 0");

  // Joint word counts over both sides.
  std::unordered_map<std::string, Count> word_counts;
  for (const auto& [src, tgt] : corpus.pairs) {
    for (const auto& w : src) ++word_counts[w];
    for (const auto& w : tgt) ++word_counts[w];
  }
  std::vector<WordEntry> words;
  words.reserve(word_counts.size());
  for (const auto& [w, c] : word_counts) words.push_back({utf8_chars(w), c});

  BpeCodec codec;
  for (int m = 0; m < num_merges; ++m) {
    // Recount adjacent pairs each round; desk-scale corpora keep this cheap.
    std::map<SymbolPair, Count> pair_counts;
    for (const auto& entry : words)
      for (std::size_t i = 0; i + 1 < entry.syms.size(); ++i)
        pair_counts[{entry.syms[i], entry.syms[i + 1]}] += entry.count;

    SymbolPair best;
    Count best_count = 0;
    for (const auto& [pair, count] : pair_counts) {
      // std::map iterates pairs in lexicographic order, so strict > keeps the
      // lexicographically smallest pair on ties.
      if (count > best_count) {
        best = pair;
        best_count = count;
      }
    }
    if (best_count < 2) break;  // pair counts exhausted

    codec.merges.push_back(best);
    for (auto& entry : words) merge_in_place(entry.syms, best);
  }

  // Vocabulary from the encoded training corpus: rendered piece -> count,
  // inserted by descending count (ties lexicographic) for stable ids.
  std::map<std::string, Count> piece_counts;
  for (const auto& entry : words) {
    for (std::size_t i = 0; i < entry.syms.size(); ++i) {
      if (i + 1 < entry.syms.size())
        piece_counts[entry.syms[i] + codec.marker] += entry.count;
      else
        piece_counts[entry.syms[i]] += entry.count;
    }
  }
  std::vector<std::pair<std::string, Count>> pieces(piece_counts.begin(), piece_counts.end());
  std::sort(pieces.begin(), pieces.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  for (const auto& [piece, count] : pieces) codec.vocab.add(piece, count);
  return codec;
}

}  // namespace longtail
