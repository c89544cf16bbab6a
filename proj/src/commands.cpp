#include "longtail/commands.hpp"

#include "longtail/bpe.hpp"
#include "longtail/corpus.hpp"
#include "longtail/decode.hpp"
#include "longtail/metrics.hpp"
#include "longtail/model/checkpoint.hpp"
#include "longtail/model/trainer.hpp"
#include "longtail/model/transformer.hpp"
#include "longtail/tau_norm.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace longtail {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ParallelCorpus slice(const ParallelCorpus& corpus, std::size_t begin, std::size_t count,
                     const std::string& name) {
  ParallelCorpus out;
  out.name = name;
  out.pairs.assign(corpus.pairs.begin() + static_cast<std::ptrdiff_t>(begin),
                   corpus.pairs.begin() + static_cast<std::ptrdiff_t>(begin + count));
  return out;
}

IdSequence clip(IdSequence ids, int limit) {
  if (static_cast<int>(ids.size()) > limit) ids.resize(static_cast<std::size_t>(limit));
  return ids;
}

IdPairs encode_corpus(const ParallelCorpus& corpus, const Vocabulary& vocab,
                      int max_len) {
  IdPairs pairs;
  pairs.reserve(corpus.size());
  for (const auto& [src, tgt] : corpus.pairs)
    pairs.push_back({clip(vocab.encode(src), max_len - 1), clip(vocab.encode(tgt), max_len - 1)});
  return pairs;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

/// Runs one report writer, downgrading its failure to a warning so the
/// remaining reports still land.
void guarded(const std::string& label, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    std::cerr << "warning: " << label << ": " << e.what() << '\n';
  }
}

}  // namespace

void cmd_prepare(const RunConfig& config) {
  config.validate();
  fs::create_directories(config.out_dir);
  const std::string out = config.out_dir + "/";

  ParallelCorpus train, valid, test;
  if (config.synthetic_task()) {
    int total = config.task_train + config.task_valid + config.task_test;
    ParallelCorpus all = generate_zipf_task(config.task_vocab, total,
                                            config.task_exponent, config.task_max_len,
                                            config.seed);
    train = slice(all, 0, static_cast<std::size_t>(config.task_train), "train");
    valid = slice(all, static_cast<std::size_t>(config.task_train),
                  static_cast<std::size_t>(config.task_valid), "valid");
    test = slice(all, static_cast<std::size_t>(config.task_train + config.task_valid),
                 static_cast<std::size_t>(config.task_test), "test");
  } else {
    train = load_parallel(config.data_train_src, config.data_train_tgt, "train");
    valid = load_parallel(config.data_valid_src, config.data_valid_tgt, "valid");
    test = load_parallel(config.data_test_src, config.data_test_tgt, "test");
  }

  save_parallel(train, out + "train.src", out + "train.tgt");
  save_parallel(valid, out + "valid.src", out + "valid.tgt");
  save_parallel(test, out + "test.src", out + "test.tgt");

  build_frequency_table(train, CorpusSide::kSource).save(out + "freq.src.tsv");
  build_frequency_table(train, CorpusSide::kTarget).save(out + "freq.tgt.tsv");

  if (config.bpe_enabled) {
    BpeCodec codec = learn_bpe(train, config.bpe_merges);
    codec.save(out + "bpe.codec");
    ParallelCorpus train_bpe = apply_bpe(codec, train);
    save_parallel(train_bpe, out + "train.bpe.src", out + "train.bpe.tgt");
    ParallelCorpus valid_bpe = apply_bpe(codec, valid);
    save_parallel(valid_bpe, out + "valid.bpe.src", out + "valid.bpe.tgt");
    ParallelCorpus test_bpe = apply_bpe(codec, test);
    save_parallel(test_bpe, out + "test.bpe.src", out + "test.bpe.tgt");
    build_frequency_table(train_bpe, CorpusSide::kTarget).save(out + "freq.tgt.bpe.tsv");
    codec.vocab.save(out + "vocab.tsv");
  } else {
    // Identity tokenization: the word level is the model's token level.
    build_frequency_table(train, CorpusSide::kTarget).save(out + "freq.tgt.bpe.tsv");
    Vocabulary vocab;
    FrequencyTable words;
    for (const auto& [src, tgt] : train.pairs) {
      for (const auto& tok : src) words.add(tok);
      for (const auto& tok : tgt) words.add(tok);
    }
    for (const auto& [token, count] : words.counts()) vocab.add(token, count);
    vocab.save(out + "vocab.tsv");
  }

  save_run_config(config, out + "resolved.cfg");
}

void cmd_train(const RunConfig& config) {
  config.validate();
  fs::create_directories(config.out_dir);
  const std::string out = config.out_dir + "/";
  const std::string art = config.artifact_dir() + "/";
  const std::string infix = config.bpe_enabled ? ".bpe" : "";

  Vocabulary vocab = Vocabulary::load(art + "vocab.tsv");
  ParallelCorpus train_c =
      load_parallel(art + "train" + infix + ".src", art + "train" + infix + ".tgt", "train");
  ParallelCorpus valid_c =
      load_parallel(art + "valid" + infix + ".src", art + "valid" + infix + ".tgt", "valid");

  ModelConfig model_cfg = config.model;
  model_cfg.vocab_size = vocab.size();
  model_cfg.validate();

  IdPairs train_pairs = encode_corpus(train_c, vocab, model_cfg.max_len);
  IdPairs valid_pairs = encode_corpus(valid_c, vocab, model_cfg.max_len);

  TrainConfig train_cfg = config.train;
  train_cfg.seed = config.seed;

  Transformer<float> model(init_params<float>(model_cfg, config.seed));

  std::ofstream log(out + "train_log.csv", std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + out + "train_log.csv");
  log << "step,lr,train_loss,valid_loss\n" << std::flush;
  auto on_log = [&](const TrainLogEntry& entry) {
    log << entry.step << ',' << fmt(entry.learning_rate) << ','
        << fmt(entry.loss_per_token) << ',' << fmt(entry.valid_loss) << '\n'
        << std::flush;
  };

  TrainResult result =
      train_loop(model, train_pairs, train_cfg, nullptr, &valid_pairs, on_log);

  save_checkpoint(out + "model.ltck", model.params(), vocab, result.steps);
  save_run_config(config, out + "resolved.cfg");
}

void cmd_evaluate(const RunConfig& config) {
  config.validate();
  fs::create_directories(config.out_dir);
  const std::string out = config.out_dir + "/";
  const std::string art = config.artifact_dir() + "/";

  Checkpoint ck = load_checkpoint(art + "model.ltck");
  std::vector<TokenId> zero_rows = apply_tau_norm(ck.params, config.tau);
  for (TokenId id : zero_rows)
    std::cerr << "warning: tau-norm left zero embedding row " << id << " unscaled\n";

  Transformer<float> model(ck.params);
  const Vocabulary& vocab = ck.vocab;

  BpeCodec codec;
  if (config.bpe_enabled) codec = BpeCodec::load(art + "bpe.codec");

  ParallelCorpus test = load_parallel(art + "test.src", art + "test.tgt", "test");
  FrequencyTable freq_src = FrequencyTable::load(art + "freq.src.tsv");
  FrequencyTable freq_tgt = FrequencyTable::load(art + "freq.tgt.tsv");
  FrequencyTable freq_tgt_bpe = FrequencyTable::load(art + "freq.tgt.bpe.tsv");

  DecodeConfig decode_cfg = config.decode;
  decode_cfg.max_len = std::min(decode_cfg.max_len, model.config().max_len - 1);

  auto translate_tokens = [&](const Sentence& src_words) {
    Sentence pieces = config.bpe_enabled ? apply_bpe(codec, src_words) : src_words;
    IdSequence ids = clip(vocab.encode(pieces), model.config().max_len - 1);
    std::vector<Hypothesis> pool = beam_decode(model, ids, decode_cfg);
    return pool.front();
  };

  // Decode the test set once; splits reuse the results through a cache.
  std::vector<Sentence> hyp_words, hyp_pieces, ref_pieces;
  std::vector<std::vector<double>> positional;
  for (const auto& [src, tgt] : test.pairs) {
    Hypothesis best = translate_tokens(src);
    IdSequence ids = best.tokens;
    if (best.terminated) ids.pop_back();
    Sentence pieces = vocab.decode(ids);
    hyp_pieces.push_back(pieces);
    hyp_words.push_back(config.bpe_enabled ? merge_bpe(pieces).words : pieces);
    ref_pieces.push_back(config.bpe_enabled ? apply_bpe(codec, tgt) : tgt);
    positional.push_back(best.positional);
  }

  std::vector<Sentence> ref_words;
  ref_words.reserve(test.size());
  for (const auto& [src, tgt] : test.pairs) ref_words.push_back(tgt);

  guarded("translations.txt",
          [&] { save_sentences(hyp_words, out + "translations.txt"); });

  auto write_buckets = [&](const std::string& path, const BucketReport& report) {
    std::ostringstream csv;
    csv << "bucket_low,bucket_high,matched,system,reference,precision,recall,f_measure\n";
    for (const auto& row : report.rows) {
      csv << row.low << ',';
      if (row.high == std::numeric_limits<Count>::max())
        csv << "inf";
      else
        csv << row.high;
      csv << ',' << row.matched << ',' << row.system_count << ','
          << row.reference_count << ',' << fmt(row.precision) << ','
          << fmt(row.recall) << ',' << fmt(row.f_measure) << '\n';
    }
    write_text(path, csv.str());
  };

  guarded("bucket_fmeasure.csv", [&] {
    write_buckets(out + "bucket_fmeasure.csv",
                  token_fmeasure_buckets(hyp_words, ref_words, freq_tgt,
                                         default_bucket_edges(), Granularity::kWord));
  });
  guarded("bucket_fmeasure_bpe.csv", [&] {
    write_buckets(out + "bucket_fmeasure_bpe.csv",
                  token_fmeasure_buckets(hyp_pieces, ref_pieces, freq_tgt_bpe,
                                         default_bucket_edges(), Granularity::kBpe));
  });

  std::vector<double> scores;
  for (const auto& sent : positional)
    scores.insert(scores.end(), sent.begin(), sent.end());

  guarded("positional_scores.csv", [&] {
    std::ostringstream csv;
    for (const auto& sent : positional) {
      for (std::size_t i = 0; i < sent.size(); ++i)
        csv << (i ? " " : "") << fmt(sent[i]);
      csv << '\n';
    }
    write_text(out + "positional_scores.csv", csv.str());
  });

  guarded("kde.csv", [&] {
    std::vector<double> grid;
    for (int i = 0; i <= 200; ++i) grid.push_back(i / 200.0);
    std::vector<double> pdf = kde_pdf(scores, grid);
    std::ostringstream csv;
    csv << "x,pdf\n";
    for (std::size_t i = 0; i < grid.size(); ++i)
      csv << fmt(grid[i]) << ',' << fmt(pdf[i]) << '\n';
    write_text(out + "kde.csv", csv.str());
  });

  guarded("split_eval.csv", [&] {
    std::vector<ParallelCorpus> parts =
        split_by_frequency_score(test, freq_src, config.eval_splits);
    std::unordered_map<std::string, Sentence> cache;
    for (std::size_t i = 0; i < test.pairs.size(); ++i) {
      std::string key;
      for (const auto& tok : test.pairs[i].first) {
        key += tok;
        key.push_back(' ');
      }
      cache.emplace(std::move(key), hyp_words[i]);
    }
    TranslateFn translate = [&](const Sentence& src) {
      std::string key;
      for (const auto& tok : src) {
        key += tok;
        key.push_back(' ');
      }
      auto it = cache.find(key);
      if (it != cache.end()) return it->second;
      Hypothesis best = translate_tokens(src);
      IdSequence ids = best.tokens;
      if (best.terminated) ids.pop_back();
      Sentence pieces = vocab.decode(ids);
      return config.bpe_enabled ? merge_bpe(pieces).words : pieces;
    };
    SplitEvaluation ev = evaluate_splits(parts, freq_src, translate);
    std::ostringstream csv;
    csv << "split,size,mean_fs,bleu\n";
    for (const auto& split : ev.splits)
      csv << split.name << ',' << split.size << ',' << fmt(split.mean_score) << ','
          << fmt(split.bleu.bleu) << '\n';
    write_text(out + "split_eval.csv", csv.str());
  });

  guarded("report.json", [&] {
    nlohmann::json report;
    BleuReport bleu = corpus_bleu(hyp_words, ref_words);
    report["bleu"] = {{"score", bleu.bleu},
                      {"precisions", bleu.precisions},
                      {"brevity_penalty", bleu.brevity_penalty},
                      {"hypothesis_length", bleu.hypothesis_length},
                      {"reference_length", bleu.reference_length}};

    IdPairs test_pairs;
    if (config.bpe_enabled) {
      ParallelCorpus test_bpe = apply_bpe(codec, test);
      test_pairs = encode_corpus(test_bpe, vocab, model.config().max_len);
    } else {
      test_pairs = encode_corpus(test, vocab, model.config().max_len);
    }
    report["mean_entropy"] = mean_entropy(model, test_pairs);

    Vec<float> norms = embedding_norms(ck.params.embedding);
    std::vector<double> norm_values, freq_values;
    for (TokenId id = Specials::count; id < vocab.size(); ++id) {
      Count c = freq_tgt_bpe.count(vocab.token_of(id));
      if (c <= 0) continue;
      norm_values.push_back(static_cast<double>(norms(id)));
      freq_values.push_back(static_cast<double>(c));
    }
    try {
      report["spearman_norm_frequency"] = spearman(norm_values, freq_values);
    } catch (const std::exception& e) {
      std::cerr << "warning: spearman: " << e.what() << '\n';
      report["spearman_norm_frequency"] = nullptr;
    }

    try {
      HistogramSpec hist = histogram(scores, config.eval_bins);
      report["positional_histogram"] = {{"bins", hist.bins},
                                        {"densities", hist.densities},
                                        {"kde_bandwidth", hist.kde_bandwidth}};
    } catch (const std::exception& e) {
      std::cerr << "warning: histogram: " << e.what() << '\n';
      report["positional_histogram"] = nullptr;
    }

    std::size_t below = 0;
    for (double s : scores)
      if (s < 0.75) ++below;
    report["positional_scores"] = {
        {"count", scores.size()},
        {"share_below_0.75",
         scores.empty() ? 0.0 : static_cast<double>(below) / static_cast<double>(scores.size())}};

    report["sentences"] = test.size();
    report["tau"] = config.tau;
    report["beam"] = decode_cfg.beam_size;
    report["length_penalty"] = decode_cfg.length_penalty;
    report["checkpoint_step"] = ck.step;
    write_text(out + "report.json", report.dump(2) + "\n");
  });

  guarded("resolved.cfg", [&] { save_run_config(config, out + "resolved.cfg"); });
}

}  // namespace longtail
