#pragma once

#include "longtail/decode.hpp"
#include "longtail/losses.hpp"
#include "longtail/model/config.hpp"
#include "longtail/model/trainer.hpp"

#include <cstdint>
#include <string>

namespace longtail {

/// Everything a run needs, in one flat structure. The file format is one
/// dotted key per line ("loss.alpha = 1.0", '#' comments); command-line
/// flags override file values, and the fully resolved config is echoed into
/// the output directory so a run can be replayed from its artifacts alone.
struct RunConfig {
  std::string out_dir = "run";
  std::string data_dir;  // artifacts from prepare; defaults to out_dir

  // Synthetic task (used when no data.* paths are given).
  int task_vocab = 200;
  double task_exponent = 1.0;
  int task_train = 5000;
  int task_valid = 500;
  int task_test = 500;
  int task_max_len = 12;

  // Raw parallel data; all six must be set to switch off the synthetic task.
  std::string data_train_src, data_train_tgt;
  std::string data_valid_src, data_valid_tgt;
  std::string data_test_src, data_test_tgt;

  bool bpe_enabled = true;
  int bpe_merges = 320;

  ModelConfig model;   // model.vocab_size is derived from the vocabulary file
  TrainConfig train;   // includes the optimizer and the loss
  DecodeConfig decode;

  double tau = 0.0;
  int eval_bins = 50;
  int eval_splits = 3;
  std::uint64_t seed = 1;

  bool synthetic_task() const {
    return data_train_src.empty() && data_train_tgt.empty();
  }

  /// Resolved location of prepared artifacts.
  std::string artifact_dir() const { return data_dir.empty() ? out_dir : data_dir; }

  void validate() const;
};

/// Applies "key = value" to one field. Unknown keys and unparsable values
/// throw with the offending key in the message.
void set_config_key(RunConfig& config, const std::string& key, const std::string& value);

/// Parses a flat dotted-key file on top of the given defaults.
RunConfig load_run_config(const std::string& path, RunConfig base = {});

/// Every key in a fixed order; parsing the result reproduces the config.
std::string serialize_run_config(const RunConfig& config);

void save_run_config(const RunConfig& config, const std::string& path);

}  // namespace longtail
