#pragma once

#include "longtail/run_config.hpp"

namespace longtail {

/// Builds the data artifacts: raw (or synthetic) corpora, frequency tables,
/// the BPE codec, subword-encoded corpora, and the vocabulary, all under
/// config.out_dir.
void cmd_prepare(const RunConfig& config);

/// Trains a model on the prepared artifacts and writes the checkpoint plus a
/// step/lr/loss CSV log. The log is flushed row by row, so an interrupted
/// run keeps its history.
void cmd_train(const RunConfig& config);

/// Decodes the test set with beam search (after optional tau-normalization)
/// and writes every report: translations, BLEU and diagnostics JSON,
/// bucketed F-measure at both granularities, positional scores, KDE curve,
/// and the frequency-score split evaluation. Reports are independent; one
/// failing is a warning, not a run failure.
void cmd_evaluate(const RunConfig& config);

}  // namespace longtail
