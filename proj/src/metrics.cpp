#include "longtail/metrics.hpp"

#include "longtail/bpe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace longtail {

namespace {

std::unordered_map<std::string, Count> ngram_counts(const Sentence& tokens, int n) {
  std::unordered_map<std::string, Count> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int j = 1; j < n; ++j) {
      key.push_back('\x1f');
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

std::unordered_map<std::string, Count> type_counts(const Sentence& tokens) {
  std::unordered_map<std::string, Count> counts;
  for (const auto& tok : tokens) ++counts[tok];
  return counts;
}

}  // namespace

BleuReport corpus_bleu(const std::vector<Sentence>& hypotheses,
                       const std::vector<Sentence>& references) {
  if (hypotheses.size() != references.size())
    throw std::runtime_error("corpus_bleu: " + std::to_string(hypotheses.size()) +
                             " hypotheses vs " + std::to_string(references.size()) +
                             " references");

  std::array<Count, 4> matched{};
  std::array<Count, 4> total{};
  BleuReport report;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const Sentence& hyp = hypotheses[s];
    const Sentence& ref = references[s];
    report.hypothesis_length += hyp.size();
    report.reference_length += ref.size();
    for (int n = 1; n <= 4; ++n) {
      auto hyp_grams = ngram_counts(hyp, n);
      auto ref_grams = ngram_counts(ref, n);
      for (const auto& [gram, count] : hyp_grams) {
        total[n - 1] += count;
        auto it = ref_grams.find(gram);
        if (it != ref_grams.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  if (report.hypothesis_length == 0) return report;

  auto c = static_cast<double>(report.hypothesis_length);
  auto r = static_cast<double>(report.reference_length);
  report.brevity_penalty = c >= r ? 1.0 : std::exp(1.0 - r / c);

  double log_sum = 0.0;
  bool any_zero = false;
  for (int n = 0; n < 4; ++n) {
    double p = total[n] > 0
                   ? static_cast<double>(matched[n]) / static_cast<double>(total[n])
                   : 0.0;
    report.precisions[static_cast<std::size_t>(n)] = p;
    if (p <= 0.0)
      any_zero = true;
    else
      log_sum += std::log(p);
  }
  if (!any_zero)
    report.bleu = 100.0 * report.brevity_penalty * std::exp(log_sum / 4.0);
  return report;
}

std::string granularity_name(Granularity granularity) {
  return granularity == Granularity::kWord ? "word" : "bpe";
}

std::vector<Count> default_bucket_edges() { return {1, 2, 3, 4, 5, 10, 100, 1000}; }

BucketReport token_fmeasure_buckets(const std::vector<Sentence>& hypotheses,
                                    const std::vector<Sentence>& references,
                                    const FrequencyTable& table,
                                    const std::vector<Count>& edges,
                                    Granularity granularity) {
  if (hypotheses.size() != references.size())
    throw std::runtime_error("token_fmeasure_buckets: " +
                             std::to_string(hypotheses.size()) + " hypotheses vs " +
                             std::to_string(references.size()) + " references");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i] < 1 || (i > 0 && edges[i] <= edges[i - 1]))
      throw std::invalid_argument(
          "token_fmeasure_buckets: edges must be ascending and >= 1");
  }

  std::size_t buckets = edges.size() + 1;
  BucketReport report;
  report.granularity = granularity;
  report.rows.resize(buckets);
  for (std::size_t b = 0; b < buckets; ++b) {
    report.rows[b].low = b == 0 ? 0 : edges[b - 1];
    report.rows[b].high =
        b < edges.size() ? edges[b] : std::numeric_limits<Count>::max();
  }

  auto bucket_of = [&](const std::string& type) {
    Count freq = table.count(type);
    return static_cast<std::size_t>(
        std::upper_bound(edges.begin(), edges.end(), freq) - edges.begin());
  };

  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    Sentence hyp = hypotheses[s];
    Sentence ref = references[s];
    if (granularity == Granularity::kWord) {
      hyp = merge_bpe(hyp).words;
      ref = merge_bpe(ref).words;
    }
    auto hyp_types = type_counts(hyp);
    auto ref_types = type_counts(ref);
    for (const auto& [type, count] : hyp_types) {
      BucketRow& row = report.rows[bucket_of(type)];
      row.system_count += count;
      auto it = ref_types.find(type);
      if (it != ref_types.end()) row.matched += std::min(count, it->second);
    }
    for (const auto& [type, count] : ref_types)
      report.rows[bucket_of(type)].reference_count += count;
  }

  for (auto& row : report.rows) {
    row.precision = row.system_count > 0 ? static_cast<double>(row.matched) /
                                               static_cast<double>(row.system_count)
                                         : 0.0;
    row.recall = row.reference_count > 0
                     ? static_cast<double>(row.matched) /
                           static_cast<double>(row.reference_count)
                     : 0.0;
    double pr = row.precision + row.recall;
    row.f_measure = pr > 0.0 ? 2.0 * row.precision * row.recall / pr : 0.0;
  }
  return report;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("spearman: need at least two points");

  std::vector<double> rx = average_ranks(x);
  std::vector<double> ry = average_ranks(y);
  auto n = static_cast<double>(x.size());
  double mean = (n + 1.0) / 2.0;
  double cov = 0.0, var_x = 0.0, var_y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = rx[i] - mean;
    double dy = ry[i] - mean;
    cov += dx * dy;
    var_x += dx * dx;
    var_y += dy * dy;
  }
  if (var_x == 0.0 || var_y == 0.0)
    throw std::domain_error("spearman: undefined for constant input");
  return cov / std::sqrt(var_x * var_y);
}

HistogramSpec histogram(const std::vector<double>& values, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram: bins must be >= 1");
  if (values.empty()) throw std::invalid_argument("histogram: no values");
  for (double v : values)
    if (!(v >= 0.0 && v <= 1.0))
      throw std::runtime_error("histogram: value " + std::to_string(v) +
                               " outside [0,1]");

  HistogramSpec spec;
  spec.bins = bins;
  std::vector<Count> counts(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    auto idx = static_cast<std::size_t>(v * bins);
    if (idx >= counts.size()) idx = counts.size() - 1;
    ++counts[idx];
  }
  double width = 1.0 / bins;
  auto n = static_cast<double>(values.size());
  spec.densities.resize(counts.size());
  for (std::size_t b = 0; b < counts.size(); ++b)
    spec.densities[b] = static_cast<double>(counts[b]) / (n * width);
  spec.kde_bandwidth = scott_bandwidth(values);
  return spec;
}

double scott_bandwidth(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  auto n = static_cast<double>(values.size());
  double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  double sd = std::sqrt(ss / (n - 1.0));
  return sd * std::pow(n, -0.2);
}

std::vector<double> kde_pdf(const std::vector<double>& values,
                            const std::vector<double>& grid) {
  if (values.size() < 2)
    throw std::invalid_argument("kde_pdf: need at least two values");
  double h = scott_bandwidth(values);
  if (h == 0.0)
    throw std::invalid_argument(
        "kde_pdf: values have zero variance; use the histogram instead");

  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  auto n = static_cast<double>(values.size());
  std::vector<double> pdf(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double sum = 0.0;
    for (double v : values) {
      double z = (grid[g] - v) / h;
      sum += std::exp(-0.5 * z * z);
    }
    pdf[g] = kInvSqrt2Pi * sum / (n * h);
  }
  return pdf;
}

SplitEvaluation evaluate_splits(const std::vector<ParallelCorpus>& splits,
                                const FrequencyTable& table,
                                const TranslateFn& translate) {
  SplitEvaluation evaluation;
  for (const auto& part : splits) {
    SplitEvaluation::Split split;
    split.name = part.name;
    split.size = part.size();
    std::vector<Sentence> hyps, refs;
    hyps.reserve(part.size());
    refs.reserve(part.size());
    double score_sum = 0.0;
    for (const auto& [src, tgt] : part.pairs) {
      hyps.push_back(translate(src));
      refs.push_back(tgt);
      score_sum += frequency_score(src, table);
    }
    if (!part.empty()) split.mean_score = score_sum / static_cast<double>(part.size());
    split.bleu = corpus_bleu(hyps, refs);
    evaluation.splits.push_back(std::move(split));
  }
  return evaluation;
}

}  // namespace longtail
