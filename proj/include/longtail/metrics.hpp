#pragma once

#include "longtail/corpus.hpp"
#include "longtail/losses.hpp"
#include "longtail/model/transformer.hpp"
#include "longtail/types.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace longtail {

// ---- BLEU -------------------------------------------------------------------

/// Corpus-level BLEU with the classic recipe: clipped n-gram precisions up to
/// order 4, geometric mean, multiplicative brevity penalty, no smoothing. Any
/// empty precision zeroes the score.
struct BleuReport {
  double bleu = 0.0;  // in [0, 100]
  std::array<double, 4> precisions{};
  double brevity_penalty = 0.0;
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;
};

BleuReport corpus_bleu(const std::vector<Sentence>& hypotheses,
                       const std::vector<Sentence>& references);

// ---- Frequency-bucketed token F-measure --------------------------------------

enum class Granularity { kWord, kBpe };

std::string granularity_name(Granularity granularity);

struct BucketRow {
  Count low = 0;  // bucket covers training frequencies in [low, high)
  Count high = 0; // std::numeric_limits<Count>::max() marks the open top bucket
  Count matched = 0;
  Count system_count = 0;
  Count reference_count = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
};

struct BucketReport {
  Granularity granularity = Granularity::kWord;
  std::vector<BucketRow> rows;
};

/// The default edges carve the long tail finely: a dedicated bucket for
/// unseen types, one bucket per count up to 5, then decade-ish steps.
std::vector<Count> default_bucket_edges();

/// Micro-averaged precision/recall/F per frequency bucket. Token matches are
/// counted per sentence as min(hypothesis count, reference count) of each
/// type, then pooled over the corpus into the bucket owning the type's
/// training frequency. Word granularity undoes subword segmentation on both
/// sides first, so the table must hold word counts; BPE granularity takes
/// sentences and table as they come.
BucketReport token_fmeasure_buckets(const std::vector<Sentence>& hypotheses,
                                    const std::vector<Sentence>& references,
                                    const FrequencyTable& table,
                                    const std::vector<Count>& edges,
                                    Granularity granularity);

// ---- Rank correlation ---------------------------------------------------------

/// Spearman rank correlation with average ranks on ties. Throws when either
/// input is constant (the correlation is undefined).
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// ---- Score distributions -------------------------------------------------------

struct HistogramSpec {
  int bins = 0;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> densities;     // per-bin density, integrates to 1
  double kde_bandwidth = 0.0;        // Scott's rule over the same values
};

/// Equal-width density histogram over [0,1]; the last bin is right-closed so
/// a probability of exactly 1 lands inside.
HistogramSpec histogram(const std::vector<double>& values, int bins);

/// Scott's-rule bandwidth: sample standard deviation times n^(-1/5). Zero
/// when the values have no spread.
double scott_bandwidth(const std::vector<double>& values);

/// Gaussian kernel density estimate with Scott's-rule bandwidth, evaluated
/// at the grid points. Needs at least two distinct values; constant samples
/// are better served by the histogram.
std::vector<double> kde_pdf(const std::vector<double>& values,
                            const std::vector<double>& grid);

// ---- Split evaluation -----------------------------------------------------------

using TranslateFn = std::function<Sentence(const Sentence&)>;

struct SplitEvaluation {
  struct Split {
    std::string name;
    std::size_t size = 0;
    double mean_score = 0.0;  // mean source-side F_S
    BleuReport bleu;
  };
  std::vector<Split> splits;
};

/// Translates every split with the supplied callback and reports BLEU next
/// to the split's mean frequency score. Split order is preserved, so parts
/// from split_by_frequency_score arrive already sorted by descending F_S.
SplitEvaluation evaluate_splits(const std::vector<ParallelCorpus>& splits,
                                const FrequencyTable& table,
                                const TranslateFn& translate);

// ---- Predictive entropy ----------------------------------------------------------

/// Mean Shannon entropy (nats) of the model's next-token distribution across
/// all teacher-forced target positions of the corpus, eos included.
template <typename S>
double mean_entropy(const Transformer<S>& model, const IdPairs& pairs) {
  double total = 0.0;
  std::size_t positions = 0;
  for (const auto& [src, tgt] : pairs) {
    Mat<S> logits = model.teacher_logits(src, tgt);
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      Vec<double> p = softmax(logits.row(r).transpose().template cast<double>());
      total += entropy(p);
      ++positions;
    }
  }
  if (positions == 0) return 0.0;
  return total / static_cast<double>(positions);
}

}  // namespace longtail
