#include "longtail/corpus.hpp"

#include "longtail/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace longtail {

namespace {

Sentence split_whitespace(const std::string& line) {
  Sentence out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::string join(const Sentence& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace

// ---- Vocabulary ------------------------------------------------------------

Vocabulary::Vocabulary() {
  add(Specials::pad_token);
  add(Specials::bos_token);
  add(Specials::eos_token);
  add(Specials::unk_token);
}

TokenId Vocabulary::add(const std::string& token, Count count) {
  auto it = ids_.find(token);
  if (it != ids_.end()) {
    counts_[it->second] += count;
    return it->second;
  }
  TokenId id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(token);
  counts_.push_back(count);
  ids_.emplace(token, id);
  return id;
}

bool Vocabulary::contains(const std::string& token) const { return ids_.count(token) > 0; }

TokenId Vocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? Specials::unk : it->second;
}

const std::string& Vocabulary::token_of(TokenId id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("token id out of range: " + std::to_string(id));
  return tokens_[id];
}

Count Vocabulary::count_of(TokenId id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("token id out of range: " + std::to_string(id));
  return counts_[id];
}

IdSequence Vocabulary::encode(const Sentence& sentence) const {
  IdSequence ids;
  ids.reserve(sentence.size());
  for (const auto& tok : sentence) ids.push_back(id_of(tok));
  return ids;
}

Sentence Vocabulary::decode(const IdSequence& ids) const {
  Sentence out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(token_of(id));
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  std::vector<TokenId> order;
  for (TokenId id = Specials::count; id < size(); ++id) order.push_back(id);
  std::stable_sort(order.begin(), order.end(),
                   [&](TokenId a, TokenId b) { return counts_[a] > counts_[b]; });
  for (TokenId id = 0; id < Specials::count; ++id)
    out << tokens_[id] << '\t' << counts_[id] << '\n';
  for (TokenId id : order) out << tokens_[id] << '\t' << counts_[id] << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  Vocabulary vocab;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("malformed vocabulary line in " + path + ": " + line);
    vocab.add(line.substr(0, tab), std::stoll(line.substr(tab + 1)));
  }
  return vocab;
}

// ---- FrequencyTable --------------------------------------------------------

void FrequencyTable::add(const std::string& token, Count n) {
  counts_[token] += n;
  total_ += n;
}

Count FrequencyTable::count(const std::string& token) const {
  auto it = counts_.find(token);
  return it == counts_.end() ? 0 : it->second;
}

void FrequencyTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  std::vector<std::pair<std::string, Count>> rows(counts_.begin(), counts_.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  for (const auto& [token, count] : rows) out << token << '\t' << count << '\n';
}

FrequencyTable FrequencyTable::load(const std::string& path) {
  FrequencyTable table;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("malformed frequency line in " + path + ": " + line);
    table.add(line.substr(0, tab), std::stoll(line.substr(tab + 1)));
  }
  return table;
}

// ---- Operations ------------------------------------------------------------

ParallelCorpus load_parallel(const std::string& source_path, const std::string& target_path,
                             const std::string& name) {
  auto src_lines = read_lines(source_path);
  auto tgt_lines = read_lines(target_path);
  if (src_lines.size() != tgt_lines.size()) {
    std::ostringstream msg;
    msg << "line count mismatch " << src_lines.size() << " vs " << tgt_lines.size() << " ("
        << source_path << " vs " << target_path << ")";
    throw std::runtime_error(msg.str());
  }
  ParallelCorpus corpus;
  corpus.name = name;
  corpus.pairs.reserve(src_lines.size());
  for (std::size_t i = 0; i < src_lines.size(); ++i)
    corpus.pairs.emplace_back(split_whitespace(src_lines[i]), split_whitespace(tgt_lines[i]));
  return corpus;
}

void save_parallel(const ParallelCorpus& corpus, const std::string& source_path,
                   const std::string& target_path) {
  std::ofstream src(source_path), tgt(target_path);
  if (!src) throw std::runtime_error("cannot write file: " + source_path);
  if (!tgt) throw std::runtime_error("cannot write file: " + target_path);
  for (const auto& [s, t] : corpus.pairs) {
    src << join(s) << '\n';
    tgt << join(t) << '\n';
  }
}

void save_sentences(const std::vector<Sentence>& sentences, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (const auto& s : sentences) out << join(s) << '\n';
}

std::vector<Sentence> load_sentences(const std::string& path) {
  std::vector<Sentence> out;
  for (const auto& line : read_lines(path)) out.push_back(split_whitespace(line));
  return out;
}

FrequencyTable build_frequency_table(const ParallelCorpus& corpus, CorpusSide side) {
  FrequencyTable table;
  for (const auto& [src, tgt] : corpus.pairs)
    for (const auto& tok : (side == CorpusSide::kSource ? src : tgt)) table.add(tok);
  return table;
}

double frequency_score(const Sentence& sentence, const FrequencyTable& table) {
  if (sentence.empty()) throw std::invalid_argument("frequency_score: empty sentence");
  double sum = 0.0;
  for (const auto& tok : sentence) sum += static_cast<double>(table.count(tok));
  return sum / static_cast<double>(sentence.size());
}

SentenceScore score_sentence(std::size_t index, const Sentence& sentence,
                             const FrequencyTable& table) {
  return SentenceScore{index, frequency_score(sentence, table), sentence.size()};
}

std::vector<ParallelCorpus> split_by_frequency_score(const ParallelCorpus& corpus,
                                                     const FrequencyTable& table, int k) {
  if (k < 1) throw std::invalid_argument("split_by_frequency_score: k must be >= 1");
  if (static_cast<std::size_t>(k) > corpus.size())
    throw std::invalid_argument("split_by_frequency_score: k=" + std::to_string(k) +
                                " exceeds corpus size " + std::to_string(corpus.size()));

  std::vector<SentenceScore> scores;
  scores.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    scores.push_back(score_sentence(i, corpus.pairs[i].first, table));
  std::sort(scores.begin(), scores.end(), [](const SentenceScore& a, const SentenceScore& b) {
    return a.f_s != b.f_s ? a.f_s > b.f_s : a.sentence_index < b.sentence_index;
  });

  const std::size_t n = corpus.size();
  const std::size_t base = n / k;
  const std::size_t extra = n % k;  // first `extra` parts take one more
  std::vector<ParallelCorpus> parts(k);
  std::size_t pos = 0;
  for (int p = 0; p < k; ++p) {
    std::size_t len = base + (static_cast<std::size_t>(p) < extra ? 1 : 0);
    parts[p].name = corpus.name + "/split" + std::to_string(p + 1);
    parts[p].pairs.reserve(len);
    for (std::size_t j = 0; j < len; ++j, ++pos)
      parts[p].pairs.push_back(corpus.pairs[scores[pos].sentence_index]);
  }
  return parts;
}

ParallelCorpus generate_zipf_task(int vocab_size, int num_pairs, double zipf_exponent,
                                  int max_len, std::uint64_t seed) {
  if (vocab_size < 2) throw std::invalid_argument("generate_zipf_task: vocab_size must be >= 2");
  if (num_pairs < 1) throw std::invalid_argument("generate_zipf_task: num_pairs must be >= 1");
  if (!(zipf_exponent > 0.0))
    throw std::invalid_argument("generate_zipf_task: zipf_exponent must be > 0");
  if (max_len < 1) throw std::invalid_argument("generate_zipf_task: max_len must be >= 1");

  // CDF of p(r) proportional to r^-s over ranks 1..V.
  std::vector<double> cdf(vocab_size);
  double acc = 0.0;
  for (int r = 1; r <= vocab_size; ++r) {
    acc += std::pow(static_cast<double>(r), -zipf_exponent);
    cdf[r - 1] = acc;
  }
  for (auto& c : cdf) c /= acc;

  std::mt19937_64 rng(seed);

  // The "translation": a seeded bijection from source type i to target type
  // perm[i] (Fisher-Yates).
  std::vector<int> perm(vocab_size);
  for (int i = 0; i < vocab_size; ++i) perm[i] = i;
  for (int i = vocab_size - 1; i > 0; --i) {
    int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[i], perm[j]);
  }

  ParallelCorpus corpus;
  corpus.name = "zipf-v" + std::to_string(vocab_size) + "-s" + std::to_string(zipf_exponent) +
                "-seed" + std::to_string(seed);
  corpus.pairs.reserve(num_pairs);
  for (int p = 0; p < num_pairs; ++p) {
    int len = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_len));
    Sentence src, tgt;
    src.reserve(len);
    tgt.reserve(len);
    for (int t = 0; t < len; ++t) {
      double u = uniform01(rng);
      int idx = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      if (idx >= vocab_size) idx = vocab_size - 1;
      src.push_back("s" + std::to_string(idx));
      tgt.push_back("t" + std::to_string(perm[idx]));
    }
    corpus.pairs.emplace_back(std::move(src), std::move(tgt));
  }
  return corpus;
}

}  // namespace longtail
