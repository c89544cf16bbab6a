#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "longtail/commands.hpp"
#include "longtail/corpus.hpp"
#include "longtail/run_config.hpp"

#include "test_util.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace longtail;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool file_exists(const std::string& path) {
  std::ifstream in(path);
  return in.good();
}

RunConfig tiny_run(const std::string& out_dir) {
  RunConfig cfg;
  cfg.out_dir = out_dir;
  cfg.task_vocab = 30;
  cfg.task_train = 200;
  cfg.task_valid = 30;
  cfg.task_test = 30;
  cfg.task_max_len = 8;
  cfg.bpe_merges = 40;
  cfg.model.d_model = 32;
  cfg.model.d_ffn = 64;
  cfg.model.num_layers = 1;
  cfg.model.max_len = 32;
  cfg.train.max_updates = 25;
  cfg.train.batch_tokens = 128;
  cfg.train.log_every = 10;
  cfg.train.optimizer.warmup_steps = 20;
  cfg.decode.beam_size = 2;
  cfg.decode.max_len = 12;
  cfg.seed = 7;
  return cfg;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(LONGTAIL_CLI) + " " + args;
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config files round-trip through serialization") {
  RunConfig cfg = tiny_run("somewhere");
  cfg.train.loss.kind = LossKind::kGeneralizedFocal;
  cfg.train.loss.alpha = 0.5;
  cfg.tau = 0.4;
  std::string text = serialize_run_config(cfg);

  TempDir tmp;
  std::string path = tmp.file("round.cfg");
  save_run_config(cfg, path);
  RunConfig back = load_run_config(path);
  CHECK(serialize_run_config(back) == text);
  CHECK(back.train.loss.kind == LossKind::kGeneralizedFocal);
  CHECK(back.tau == 0.4);
  CHECK(back.seed == 7);
}

TEST_CASE("config parsing handles comments, spacing, and overrides") {
  TempDir tmp;
  std::string path = tmp.file("mixed.cfg");
  {
    std::ofstream out(path);
    out << "# a comment\n";
    out << "\n";
    out << "seed=42\n";
    out << "  loss.family   =   focal  \n";
    out << "loss.gamma = 2.0\n";
    out << "seed = 43\n";  // later lines win
  }
  RunConfig cfg = load_run_config(path);
  CHECK(cfg.seed == 43);
  CHECK(cfg.train.loss.kind == LossKind::kFocal);
  CHECK(cfg.train.loss.gamma == 2.0);
}

TEST_CASE("config errors carry the offending key") {
  RunConfig cfg;
  CHECK_THROWS_AS(set_config_key(cfg, "nope.key", "1"), std::invalid_argument);
  CHECK_THROWS_AS(set_config_key(cfg, "task.vocab", "abc"), std::invalid_argument);
  CHECK_THROWS_AS(set_config_key(cfg, "task.vocab", "12x"), std::invalid_argument);
  CHECK_THROWS_AS(set_config_key(cfg, "bpe.enabled", "maybe"), std::invalid_argument);
  CHECK_THROWS_AS(set_config_key(cfg, "loss.family", "hinge"), std::invalid_argument);

  TempDir tmp;
  std::string path = tmp.file("broken.cfg");
  {
    std::ofstream out(path);
    out << "just some words\n";
  }
  CHECK_THROWS_AS(load_run_config(path), std::runtime_error);
  CHECK_THROWS_AS(load_run_config(tmp.file("missing.cfg")), std::runtime_error);
}

TEST_CASE("config validation rejects partial data paths and bad ranges") {
  RunConfig cfg = tiny_run("dir");
  cfg.data_train_src = "only-one.src";
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.data_train_src.clear();
  cfg.tau = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.tau = 0.0;
  cfg.eval_splits = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.eval_splits = 3;
  cfg.validate();
}

TEST_CASE("the full pipeline runs and is reproducible byte for byte") {
  TempDir tmp;
  std::string dir_a = tmp.file("a");
  std::string dir_b = tmp.file("b");

  RunConfig cfg_a = tiny_run(dir_a);
  cmd_prepare(cfg_a);
  for (const char* name :
       {"train.src", "train.tgt", "valid.src", "valid.tgt", "test.src", "test.tgt",
        "train.bpe.src", "train.bpe.tgt", "bpe.codec", "vocab.tsv", "freq.src.tsv",
        "freq.tgt.tsv", "freq.tgt.bpe.tsv", "resolved.cfg"})
    CHECK(file_exists(dir_a + "/" + name));

  RunConfig cfg_b = tiny_run(dir_b);
  cmd_prepare(cfg_b);
  for (const char* name : {"train.src", "train.bpe.tgt", "vocab.tsv", "bpe.codec"})
    CHECK(read_file(dir_a + "/" + name) == read_file(dir_b + "/" + name));

  // The subword vocabulary cannot exceed the merge budget plus the rendered
  // alphabet (each raw character in plain and continuation form) and specials.
  Vocabulary vocab = Vocabulary::load(dir_a + "/vocab.tsv");
  std::set<char> alphabet;
  for (const std::string& text :
       {read_file(dir_a + "/train.src"), read_file(dir_a + "/train.tgt")})
    for (char ch : text)
      if (ch != ' ' && ch != '\n') alphabet.insert(ch);
  CHECK(vocab.size() <=
        2 * (cfg_a.bpe_merges + static_cast<int>(alphabet.size())) + 4);

  // Word frequency tables match a direct recount.
  FrequencyTable freq = FrequencyTable::load(dir_a + "/freq.src.tsv");
  ParallelCorpus train_raw =
      load_parallel(dir_a + "/train.src", dir_a + "/train.tgt", "train");
  FrequencyTable recount;
  for (const auto& [src, tgt] : train_raw.pairs)
    for (const auto& tok : src) recount.add(tok);
  CHECK(freq.num_types() == recount.num_types());
  for (const auto& [token, count] : recount.counts())
    CHECK(freq.count(token) == count);

  cmd_train(cfg_a);
  CHECK(file_exists(dir_a + "/model.ltck"));
  std::string log = read_file(dir_a + "/train_log.csv");
  CHECK(log.find("step,lr,train_loss,valid_loss") == 0);
  {
    std::istringstream rows(log);
    std::string line;
    std::getline(rows, line);
    long prev_step = 0;
    int entries = 0;
    while (std::getline(rows, line)) {
      std::istringstream cells(line);
      std::string step_s, lr_s;
      std::getline(cells, step_s, ',');
      std::getline(cells, lr_s, ',');
      long step = std::stol(step_s);
      CHECK(step > prev_step);
      CHECK(std::stod(lr_s) > 0.0);
      prev_step = step;
      ++entries;
    }
    CHECK(prev_step == 25);
    CHECK(entries == 4);  // steps 1, 10, 20, 25
  }

  cmd_train(cfg_b);
  CHECK(read_file(dir_a + "/model.ltck") == read_file(dir_b + "/model.ltck"));
  CHECK(read_file(dir_a + "/train_log.csv") == read_file(dir_b + "/train_log.csv"));

  cmd_evaluate(cfg_a);
  for (const char* name :
       {"translations.txt", "report.json", "bucket_fmeasure.csv",
        "bucket_fmeasure_bpe.csv", "positional_scores.csv", "kde.csv",
        "split_eval.csv", "resolved.cfg"})
    CHECK(file_exists(dir_a + "/" + name));

  cmd_evaluate(cfg_b);
  for (const char* name :
       {"translations.txt", "report.json", "bucket_fmeasure.csv",
        "bucket_fmeasure_bpe.csv", "positional_scores.csv", "kde.csv",
        "split_eval.csv"})
    CHECK(read_file(dir_a + "/" + name) == read_file(dir_b + "/" + name));

  // Replaying the echoed config reproduces the evaluation bit for bit.
  std::string dir_c = tmp.file("c");
  RunConfig echoed = load_run_config(dir_a + "/resolved.cfg");
  echoed.data_dir = dir_a;
  echoed.out_dir = dir_c;
  cmd_evaluate(echoed);
  CHECK(read_file(dir_a + "/report.json") == read_file(dir_c + "/report.json"));
  CHECK(read_file(dir_a + "/translations.txt") ==
        read_file(dir_c + "/translations.txt"));

  // tau = 0 is exactly the identity; a real tau changes the reports.
  std::string dir_d = tmp.file("d");
  RunConfig tau0 = cfg_a;
  tau0.data_dir = dir_a;
  tau0.out_dir = dir_d;
  tau0.tau = 0.0;
  cmd_evaluate(tau0);
  CHECK(read_file(dir_d + "/report.json") == read_file(dir_a + "/report.json"));

  std::string dir_e = tmp.file("e");
  RunConfig tau4 = cfg_a;
  tau4.data_dir = dir_a;
  tau4.out_dir = dir_e;
  tau4.tau = 0.4;
  cmd_evaluate(tau4);
  CHECK(read_file(dir_e + "/report.json") != read_file(dir_a + "/report.json"));
}

TEST_CASE("the identity tokenization path skips BPE") {
  TempDir tmp;
  std::string dir = tmp.file("plain");
  RunConfig cfg = tiny_run(dir);
  cfg.bpe_enabled = false;
  cmd_prepare(cfg);
  CHECK(!file_exists(dir + "/bpe.codec"));
  CHECK(!file_exists(dir + "/train.bpe.src"));
  CHECK(file_exists(dir + "/vocab.tsv"));

  // Word types plus specials make up the whole vocabulary.
  ParallelCorpus train_raw = load_parallel(dir + "/train.src", dir + "/train.tgt", "t");
  std::set<std::string> types;
  for (const auto& [src, tgt] : train_raw.pairs) {
    types.insert(src.begin(), src.end());
    types.insert(tgt.begin(), tgt.end());
  }
  Vocabulary vocab = Vocabulary::load(dir + "/vocab.tsv");
  CHECK(vocab.size() == static_cast<int>(types.size()) + 4);

  cmd_train(cfg);
  cmd_evaluate(cfg);
  CHECK(file_exists(dir + "/report.json"));
  CHECK(file_exists(dir + "/bucket_fmeasure_bpe.csv"));

  // Without subwords both granularities see the same tokens and table.
  CHECK(read_file(dir + "/bucket_fmeasure.csv") ==
        read_file(dir + "/bucket_fmeasure_bpe.csv"));
}

TEST_CASE("the binary wires flags, exit codes, and error lines") {
  CHECK(run_cli("--help > /dev/null 2>&1") == 0);
  CHECK(run_cli("bogus-subcommand > /dev/null 2>&1") != 0);

  TempDir tmp;
  std::string dir = tmp.file("cli");
  std::string cfg_path = tmp.file("cli.cfg");
  save_run_config(tiny_run(dir), cfg_path);

  CHECK(run_cli("prepare --config " + cfg_path + " > /dev/null 2>&1") == 0);

  // Evaluating without a checkpoint must fail with a one-line error.
  std::string err_path = tmp.file("err.txt");
  CHECK(run_cli("evaluate --config " + cfg_path + " 2> " + err_path) == 1);
  std::string err = read_file(err_path);
  CHECK(err.rfind("error: ", 0) == 0);
  CHECK(err.find('\n') == err.size() - 1);

  CHECK(run_cli("train --config " + cfg_path + " > /dev/null 2>&1") == 0);
  CHECK(run_cli("evaluate --config " + cfg_path + " --beam 1 --tau 0.2 > /dev/null 2>&1") == 0);

  // The echoed config reflects the command-line overrides.
  RunConfig echoed = load_run_config(dir + "/resolved.cfg");
  CHECK(echoed.decode.beam_size == 1);
  CHECK(echoed.tau == 0.2);
}
