#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "longtail/corpus.hpp"
#include "longtail/metrics.hpp"
#include "longtail/model/params.hpp"
#include "longtail/model/transformer.hpp"
#include "longtail/rng.hpp"
#include "longtail/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

using namespace longtail;

namespace {

Sentence words(std::initializer_list<const char*> toks) {
  Sentence s;
  for (auto* t : toks) s.emplace_back(t);
  return s;
}

// Reference BLEU written against different containers: n-grams as token
// vectors in an ordered map, precisions in long double.
struct OracleBleu {
  long double bleu = 0.0L;
  std::array<long double, 4> precisions{};
  long double bp = 0.0L;
};

OracleBleu oracle_bleu(const std::vector<Sentence>& hyps,
                       const std::vector<Sentence>& refs) {
  using Gram = std::vector<std::string>;
  std::array<long, 4> matched{}, total{};
  long c = 0, r = 0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    c += static_cast<long>(hyps[s].size());
    r += static_cast<long>(refs[s].size());
    for (int n = 1; n <= 4; ++n) {
      std::map<Gram, long> hyp_grams, ref_grams;
      for (std::size_t i = 0; i + n <= hyps[s].size(); ++i)
        ++hyp_grams[Gram(hyps[s].begin() + i, hyps[s].begin() + i + n)];
      for (std::size_t i = 0; i + n <= refs[s].size(); ++i)
        ++ref_grams[Gram(refs[s].begin() + i, refs[s].begin() + i + n)];
      for (auto& [g, k] : hyp_grams) {
        total[n - 1] += k;
        auto it = ref_grams.find(g);
        if (it != ref_grams.end()) matched[n - 1] += std::min(k, it->second);
      }
    }
  }
  OracleBleu out;
  if (c == 0) return out;
  out.bp = c >= r ? 1.0L : std::exp(1.0L - static_cast<long double>(r) / c);
  long double log_sum = 0.0L;
  bool zero = false;
  for (int n = 0; n < 4; ++n) {
    out.precisions[n] =
        total[n] > 0 ? static_cast<long double>(matched[n]) / total[n] : 0.0L;
    if (out.precisions[n] <= 0.0L)
      zero = true;
    else
      log_sum += std::log(out.precisions[n]);
  }
  if (!zero) out.bleu = 100.0L * out.bp * std::exp(log_sum / 4.0L);
  return out;
}

std::vector<Sentence> random_corpus(int sentences, int max_len, std::uint64_t seed) {
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f"};
  std::mt19937_64 rng(seed);
  std::vector<Sentence> out;
  for (int s = 0; s < sentences; ++s) {
    int len = 1 + static_cast<int>(uniform01(rng) * max_len);
    Sentence sent;
    for (int i = 0; i < len; ++i)
      sent.push_back(vocab[static_cast<std::size_t>(uniform01(rng) * vocab.size())]);
    out.push_back(std::move(sent));
  }
  return out;
}

const BucketRow& bucket_at(const BucketReport& report, Count low) {
  for (const auto& row : report.rows)
    if (row.low == low) return row;
  REQUIRE(false);
  return report.rows.front();
}

ModelConfig entropy_config(int vocab) {
  ModelConfig cfg;
  cfg.vocab_size = vocab;
  cfg.d_model = 8;
  cfg.num_heads = 2;
  cfg.d_ffn = 12;
  cfg.num_layers = 1;
  cfg.max_len = 16;
  cfg.dropout = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("a perfect hypothesis corpus scores 100") {
  std::vector<Sentence> refs{words({"the", "cat", "sat", "on", "the", "mat"}),
                             words({"a", "long", "tail", "of", "rare", "tokens"})};
  BleuReport report = corpus_bleu(refs, refs);
  CHECK(report.bleu == doctest::Approx(100.0));
  CHECK(report.brevity_penalty == 1.0);
  for (double p : report.precisions) CHECK(p == 1.0);
}

TEST_CASE("clipping caps repeated unigrams and zero higher orders kill the score") {
  std::vector<Sentence> hyp{words({"the", "the", "the", "the", "the", "the", "the"})};
  std::vector<Sentence> ref{words({"the", "cat", "is", "on", "the", "mat"})};
  BleuReport report = corpus_bleu(hyp, ref);
  CHECK(report.precisions[0] == doctest::Approx(2.0 / 7.0));
  CHECK(report.precisions[1] == 0.0);
  CHECK(report.bleu == 0.0);
}

TEST_CASE("no 4-gram overlap means zero BLEU") {
  std::vector<Sentence> hyp{words({"a", "b", "c", "d", "e"})};
  std::vector<Sentence> ref{words({"a", "b", "c", "x", "d", "e"})};
  BleuReport report = corpus_bleu(hyp, ref);
  CHECK(report.precisions[3] == 0.0);
  CHECK(report.bleu == 0.0);
}

TEST_CASE("the brevity penalty matches the closed form") {
  std::vector<Sentence> hyp{words({"a", "b", "c", "d", "e"})};
  std::vector<Sentence> ref{words({"a", "b", "c", "d", "e", "f"})};
  BleuReport report = corpus_bleu(hyp, ref);
  for (double p : report.precisions) CHECK(p == 1.0);
  CHECK(report.brevity_penalty == doctest::Approx(std::exp(1.0 - 6.0 / 5.0)));
  CHECK(report.bleu == doctest::Approx(100.0 * std::exp(-0.2)));
}

TEST_CASE("corpus BLEU agrees with an independent implementation") {
  for (std::uint64_t seed : {3u, 17u, 99u}) {
    auto hyps = random_corpus(20, 12, seed);
    auto refs = random_corpus(20, 12, seed + 1000);
    BleuReport mine = corpus_bleu(hyps, refs);
    OracleBleu oracle = oracle_bleu(hyps, refs);
    CHECK(mine.bleu == doctest::Approx(static_cast<double>(oracle.bleu)).epsilon(1e-12));
    CHECK(mine.brevity_penalty ==
          doctest::Approx(static_cast<double>(oracle.bp)).epsilon(1e-12));
    for (int n = 0; n < 4; ++n)
      CHECK(mine.precisions[static_cast<std::size_t>(n)] ==
            doctest::Approx(static_cast<double>(oracle.precisions[n])).epsilon(1e-12));
    BleuReport self = corpus_bleu(hyps, hyps);
    CHECK(self.bleu == doctest::Approx(100.0));
  }
}

TEST_CASE("BLEU rejects misaligned corpora") {
  std::vector<Sentence> hyp{words({"a"})};
  std::vector<Sentence> ref;
  CHECK_THROWS_AS(corpus_bleu(hyp, ref), std::runtime_error);
}

TEST_CASE("identical corpora hit F equal to one in every occupied bucket") {
  FrequencyTable table;
  table.add("the", 2000);
  table.add("cat", 50);
  table.add("sat", 3);
  std::vector<Sentence> refs{words({"the", "cat", "sat", "mat"})};
  BucketReport report = token_fmeasure_buckets(refs, refs, table,
                                               default_bucket_edges(),
                                               Granularity::kWord);
  for (const auto& row : report.rows) {
    CHECK(row.matched <= std::min(row.system_count, row.reference_count));
    if (row.reference_count > 0) {
      CHECK(row.precision == 1.0);
      CHECK(row.recall == 1.0);
      CHECK(row.f_measure == 1.0);
    }
  }
  CHECK(bucket_at(report, 0).reference_count == 1);     // "mat" is unseen
  CHECK(bucket_at(report, 1000).reference_count == 1);  // "the"
}

TEST_CASE("disjoint vocabularies score zero everywhere") {
  FrequencyTable table;
  table.add("a", 10);
  table.add("b", 10);
  std::vector<Sentence> hyp{words({"a", "a"})};
  std::vector<Sentence> ref{words({"b", "b"})};
  BucketReport report =
      token_fmeasure_buckets(hyp, ref, table, default_bucket_edges(),
                             Granularity::kWord);
  for (const auto& row : report.rows) {
    CHECK(row.matched == 0);
    CHECK(row.f_measure == 0.0);
  }
}

TEST_CASE("bucket aggregates match a hand count") {
  FrequencyTable table;
  table.add("the", 2000);
  table.add("cat", 50);
  table.add("sat", 3);
  table.add("dog", 7);
  std::vector<Sentence> hyps{words({"the", "cat", "cat"}), words({"dog", "sat"})};
  std::vector<Sentence> refs{words({"the", "cat", "mat"}),
                             words({"dog", "dog", "sat"})};
  BucketReport report = token_fmeasure_buckets(hyps, refs, table,
                                               default_bucket_edges(),
                                               Granularity::kWord);

  const BucketRow& top = bucket_at(report, 1000);  // "the"
  CHECK(top.matched == 1);
  CHECK(top.system_count == 1);
  CHECK(top.reference_count == 1);
  CHECK(top.f_measure == doctest::Approx(1.0));

  const BucketRow& tens = bucket_at(report, 10);  // "cat"
  CHECK(tens.matched == 1);
  CHECK(tens.system_count == 2);
  CHECK(tens.reference_count == 1);
  CHECK(tens.precision == doctest::Approx(0.5));
  CHECK(tens.recall == doctest::Approx(1.0));
  CHECK(tens.f_measure == doctest::Approx(2.0 / 3.0));

  const BucketRow& fives = bucket_at(report, 5);  // "dog"
  CHECK(fives.matched == 1);
  CHECK(fives.system_count == 1);
  CHECK(fives.reference_count == 2);
  CHECK(fives.f_measure == doctest::Approx(2.0 / 3.0));

  const BucketRow& threes = bucket_at(report, 3);  // "sat"
  CHECK(threes.f_measure == doctest::Approx(1.0));

  const BucketRow& unseen = bucket_at(report, 0);  // "mat"
  CHECK(unseen.matched == 0);
  CHECK(unseen.reference_count == 1);
  CHECK(unseen.f_measure == 0.0);
}

TEST_CASE("word granularity undoes subword segmentation first") {
  FrequencyTable table;
  table.add("low", 5);
  table.add("cat", 50);
  std::vector<Sentence> hyp{words({"lo@@", "w", "cat"})};
  std::vector<Sentence> ref{words({"low", "cat"})};

  BucketReport merged = token_fmeasure_buckets(hyp, ref, table,
                                               default_bucket_edges(),
                                               Granularity::kWord);
  CHECK(bucket_at(merged, 5).f_measure == doctest::Approx(1.0));
  CHECK(bucket_at(merged, 10).f_measure == doctest::Approx(1.0));
  CHECK(granularity_name(merged.granularity) == "word");

  FrequencyTable piece_table;
  piece_table.add("lo@@", 5);
  piece_table.add("w", 5);
  piece_table.add("low", 5);
  piece_table.add("cat", 50);
  BucketReport pieces = token_fmeasure_buckets(hyp, ref, piece_table,
                                               default_bucket_edges(),
                                               Granularity::kBpe);
  CHECK(granularity_name(pieces.granularity) == "bpe");
  CHECK(bucket_at(pieces, 10).f_measure == doctest::Approx(1.0));  // "cat"
  CHECK(bucket_at(pieces, 5).matched == 0);  // pieces never equal the whole word
}

TEST_CASE("bucket edges are validated") {
  FrequencyTable table;
  std::vector<Sentence> one{words({"a"})};
  CHECK_THROWS_AS(
      token_fmeasure_buckets(one, one, table, {5, 5}, Granularity::kWord),
      std::invalid_argument);
  CHECK_THROWS_AS(
      token_fmeasure_buckets(one, one, table, {0, 5}, Granularity::kWord),
      std::invalid_argument);
  std::vector<Sentence> none;
  CHECK_THROWS_AS(token_fmeasure_buckets(one, none, table, {5}, Granularity::kWord),
                  std::runtime_error);
}

TEST_CASE("spearman hits the closed forms on monotone data") {
  std::vector<double> x{0.3, 1.2, 5.0, 9.4, 11.0};
  std::vector<double> inc, dec;
  for (double v : x) {
    inc.push_back(std::exp(v));
    dec.push_back(-v * v * v);
  }
  CHECK(spearman(x, inc) == doctest::Approx(1.0));
  CHECK(spearman(x, dec) == doctest::Approx(-1.0));
}

TEST_CASE("spearman averages tied ranks") {
  std::vector<double> x{1, 2, 2, 4};
  std::vector<double> y{10, 20, 30, 40};
  // ranks of x: 1, 2.5, 2.5, 4; ranks of y: 1..4; Pearson = 4.5/sqrt(4.5*5)
  CHECK(spearman(x, y) == doctest::Approx(4.5 / std::sqrt(22.5)).epsilon(1e-12));
}

TEST_CASE("spearman is invariant under strictly monotone transforms") {
  std::mt19937_64 rng(7);
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    x.push_back(uniform_range(rng, -3.0, 3.0));
    y.push_back(uniform_range(rng, -3.0, 3.0));
  }
  double base = spearman(x, y);
  std::vector<double> ex, cy;
  for (double v : x) ex.push_back(std::exp(v));
  for (double v : y) cy.push_back(v * v * v);
  CHECK(spearman(ex, cy) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("spearman rejects degenerate input") {
  CHECK_THROWS_AS(spearman({1, 2}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(spearman({1}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(spearman({2, 2, 2}, {1, 2, 3}), std::domain_error);
}

TEST_CASE("a point mass lands in a single bin") {
  std::vector<double> values(25, 0.5);
  HistogramSpec spec = histogram(values, 10);
  for (int b = 0; b < 10; ++b)
    CHECK(spec.densities[static_cast<std::size_t>(b)] ==
          doctest::Approx(b == 5 ? 10.0 : 0.0));
  CHECK(spec.kde_bandwidth == 0.0);
}

TEST_CASE("histogram densities integrate to one") {
  std::mt19937_64 rng(11);
  std::vector<double> values;
  for (int i = 0; i < 777; ++i) values.push_back(uniform01(rng));
  values.push_back(0.0);
  values.push_back(1.0);  // right-closed last bin
  HistogramSpec spec = histogram(values, 13);
  double mass = 0.0;
  for (double d : spec.densities) mass += d / 13.0;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(spec.kde_bandwidth > 0.0);
}

TEST_CASE("uniform samples fill the bins evenly") {
  std::mt19937_64 rng(5);
  std::vector<double> values;
  for (int i = 0; i < 10000; ++i) values.push_back(uniform01(rng));
  HistogramSpec spec = histogram(values, 10);
  for (double d : spec.densities) {
    CHECK(d > 0.85);
    CHECK(d < 1.15);
  }
}

TEST_CASE("histogram validates its input") {
  CHECK_THROWS_AS(histogram({0.5}, 0), std::invalid_argument);
  CHECK_THROWS_AS(histogram({}, 10), std::invalid_argument);
  CHECK_THROWS_AS(histogram({0.5, 1.2}, 10), std::runtime_error);
  CHECK_THROWS_AS(histogram({-0.1}, 10), std::runtime_error);
}

TEST_CASE("the KDE is symmetric for symmetric data and never negative") {
  std::vector<double> values{0.2, 0.8, 0.35, 0.65, 0.5};
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
  std::vector<double> pdf = kde_pdf(values, grid);
  for (double p : pdf) CHECK(p >= 0.0);
  for (int i = 0; i <= 50; ++i)
    CHECK(pdf[static_cast<std::size_t>(i)] ==
          doctest::Approx(pdf[static_cast<std::size_t>(100 - i)]).epsilon(1e-9));
}

TEST_CASE("the KDE of normal samples tracks the smoothed density") {
  std::mt19937_64 rng(53);
  std::vector<double> samples;
  for (int i = 0; i < 1000; ++i) samples.push_back(normal01(rng));
  double h = scott_bandwidth(samples);
  REQUIRE(h > 0.0);

  std::vector<double> grid{-1.0, -0.5, 0.0, 0.5, 1.0};
  std::vector<double> pdf = kde_pdf(samples, grid);
  // Smoothing a standard normal with a Gaussian kernel of width h yields a
  // normal with variance 1 + h^2.
  double var = 1.0 + h * h;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double expected = std::exp(-0.5 * grid[i] * grid[i] / var) /
                      std::sqrt(2.0 * 3.14159265358979323846 * var);
    CHECK(std::abs(pdf[i] - expected) / expected < 0.05);
  }
}

TEST_CASE("the KDE refuses degenerate samples") {
  CHECK_THROWS_AS(kde_pdf({0.5}, {0.5}), std::invalid_argument);
  CHECK_THROWS_WITH_AS(kde_pdf({0.5, 0.5, 0.5}, {0.5}),
                       doctest::Contains("histogram"), std::invalid_argument);
}

TEST_CASE("a single split reduces to plain corpus BLEU") {
  ParallelCorpus corpus;
  corpus.name = "all";
  corpus.pairs = {{words({"a", "b", "a", "b"}), words({"x", "y", "z", "w"})},
                  {words({"c", "c", "a", "b", "c"}), words({"z", "y", "x", "w", "v"})}};
  FrequencyTable table;
  for (const auto& [src, tgt] : corpus.pairs)
    for (const auto& tok : src) table.add(tok);

  TranslateFn echo_target = [&](const Sentence& src) {
    for (const auto& [s, t] : corpus.pairs)
      if (s == src) return t;
    return Sentence{};
  };
  SplitEvaluation ev = evaluate_splits({corpus}, table, echo_target);
  REQUIRE(ev.splits.size() == 1);
  CHECK(ev.splits[0].name == "all");
  CHECK(ev.splits[0].size == 2);
  CHECK(ev.splits[0].bleu.bleu == doctest::Approx(100.0));
}

TEST_CASE("split evaluation keeps the descending frequency-score order") {
  ParallelCorpus corpus;
  for (int i = 0; i < 9; ++i) {
    std::string tok = "w" + std::to_string(i);
    Sentence five(5, tok);
    corpus.pairs.push_back({five, five});
  }
  FrequencyTable table;
  for (int i = 0; i < 9; ++i) table.add("w" + std::to_string(i), 9 - i);

  auto parts = split_by_frequency_score(corpus, table, 3);
  REQUIRE(parts.size() == 3);

  // Degrade translations of the rare-token split only.
  TranslateFn translate = [&](const Sentence& src) {
    if (table.count(src[0]) <= 3) return Sentence{"wrong", "tokens", "here", "now"};
    return src;
  };
  SplitEvaluation ev = evaluate_splits(parts, table, translate);
  REQUIRE(ev.splits.size() == 3);
  CHECK(ev.splits[0].mean_score > ev.splits[1].mean_score);
  CHECK(ev.splits[1].mean_score > ev.splits[2].mean_score);
  CHECK(ev.splits[0].bleu.bleu > ev.splits[2].bleu.bleu);
  CHECK(ev.splits[2].bleu.bleu == 0.0);
  for (const auto& split : ev.splits) CHECK(split.size == 3);
}

TEST_CASE("a zero embedding makes every prediction uniform") {
  ModelConfig cfg = entropy_config(100);
  ModelParams<double> params = init_params<double>(cfg, 3);
  params.embedding.setZero();
  Transformer<double> model(params);
  IdPairs pairs{{{4, 5}, {6, 7}}, {{8}, {9, 10, 11}}};
  CHECK(mean_entropy(model, pairs) == doctest::Approx(std::log(100.0)).epsilon(1e-9));
}

TEST_CASE("mean entropy matches direct summation") {
  ModelConfig cfg = entropy_config(13);
  Transformer<double> model(init_params<double>(cfg, 21));
  IdPairs pairs{{{4, 5, 6}, {7, 8, 9, 10}}, {{11, 12}, {5, 6, 7}}};

  double total = 0.0;
  int positions = 0;
  for (const auto& [src, tgt] : pairs) {
    Mat<double> logits = model.teacher_logits(src, tgt);
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      long double denom = 0.0L;
      long double mx = logits.row(r).maxCoeff();
      for (Eigen::Index j = 0; j < logits.cols(); ++j)
        denom += std::exp(static_cast<long double>(logits(r, j)) - mx);
      long double ent = 0.0L;
      for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        long double p = std::exp(static_cast<long double>(logits(r, j)) - mx) / denom;
        if (p > 0.0L) ent -= p * std::log(p);
      }
      total += static_cast<double>(ent);
      ++positions;
    }
  }
  REQUIRE(positions == 9);
  CHECK(mean_entropy(model, pairs) ==
        doctest::Approx(total / positions).epsilon(1e-9));
  CHECK(mean_entropy(model, {}) == 0.0);
}
