#include "longtail/run_config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace longtail {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

long long parse_int(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer for " + key + ": '" + value + "'");
  }
  if (used != value.size())
    throw std::invalid_argument("config: bad integer for " + key + ": '" + value + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": '" + value + "'");
  }
  if (used != value.size())
    throw std::invalid_argument("config: bad number for " + key + ": '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": '" + value + "'");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void set_config_key(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "out.dir") c.out_dir = value;
  else if (key == "data.dir") c.data_dir = value;
  else if (key == "task.vocab") c.task_vocab = static_cast<int>(parse_int(key, value));
  else if (key == "task.exponent") c.task_exponent = parse_double(key, value);
  else if (key == "task.train") c.task_train = static_cast<int>(parse_int(key, value));
  else if (key == "task.valid") c.task_valid = static_cast<int>(parse_int(key, value));
  else if (key == "task.test") c.task_test = static_cast<int>(parse_int(key, value));
  else if (key == "task.max_len") c.task_max_len = static_cast<int>(parse_int(key, value));
  else if (key == "data.train_src") c.data_train_src = value;
  else if (key == "data.train_tgt") c.data_train_tgt = value;
  else if (key == "data.valid_src") c.data_valid_src = value;
  else if (key == "data.valid_tgt") c.data_valid_tgt = value;
  else if (key == "data.test_src") c.data_test_src = value;
  else if (key == "data.test_tgt") c.data_test_tgt = value;
  else if (key == "bpe.enabled") c.bpe_enabled = parse_bool(key, value);
  else if (key == "bpe.merges") c.bpe_merges = static_cast<int>(parse_int(key, value));
  else if (key == "model.d_model") c.model.d_model = static_cast<int>(parse_int(key, value));
  else if (key == "model.layers") c.model.num_layers = static_cast<int>(parse_int(key, value));
  else if (key == "model.heads") c.model.num_heads = static_cast<int>(parse_int(key, value));
  else if (key == "model.d_ffn") c.model.d_ffn = static_cast<int>(parse_int(key, value));
  else if (key == "model.dropout") c.model.dropout = parse_double(key, value);
  else if (key == "model.max_len") c.model.max_len = static_cast<int>(parse_int(key, value));
  else if (key == "loss.family") c.train.loss.kind = loss_kind_from_string(value);
  else if (key == "loss.gamma") c.train.loss.gamma = parse_double(key, value);
  else if (key == "loss.alpha") c.train.loss.alpha = parse_double(key, value);
  else if (key == "loss.epsilon") c.train.loss.epsilon = parse_double(key, value);
  else if (key == "optim.lr") c.train.optimizer.learning_rate = parse_double(key, value);
  else if (key == "optim.warmup")
    c.train.optimizer.warmup_steps = static_cast<int>(parse_int(key, value));
  else if (key == "optim.beta1") c.train.optimizer.beta1 = parse_double(key, value);
  else if (key == "optim.beta2") c.train.optimizer.beta2 = parse_double(key, value);
  else if (key == "optim.eps") c.train.optimizer.eps = parse_double(key, value);
  else if (key == "train.updates") c.train.max_updates = static_cast<int>(parse_int(key, value));
  else if (key == "train.batch_tokens")
    c.train.batch_tokens = static_cast<int>(parse_int(key, value));
  else if (key == "train.log_every")
    c.train.log_every = static_cast<int>(parse_int(key, value));
  else if (key == "decode.beam") c.decode.beam_size = static_cast<int>(parse_int(key, value));
  else if (key == "decode.max_len") c.decode.max_len = static_cast<int>(parse_int(key, value));
  else if (key == "decode.lenpen") c.decode.length_penalty = parse_double(key, value);
  else if (key == "eval.tau") c.tau = parse_double(key, value);
  else if (key == "eval.bins") c.eval_bins = static_cast<int>(parse_int(key, value));
  else if (key == "eval.splits") c.eval_splits = static_cast<int>(parse_int(key, value));
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: " + path + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
    set_config_key(base, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return base;
}

std::string serialize_run_config(const RunConfig& c) {
  std::ostringstream out;
  out << "out.dir = " << c.out_dir << '\n';
  out << "data.dir = " << c.data_dir << '\n';
  out << "seed = " << c.seed << '\n';
  out << "task.vocab = " << c.task_vocab << '\n';
  out << "task.exponent = " << format_double(c.task_exponent) << '\n';
  out << "task.train = " << c.task_train << '\n';
  out << "task.valid = " << c.task_valid << '\n';
  out << "task.test = " << c.task_test << '\n';
  out << "task.max_len = " << c.task_max_len << '\n';
  out << "data.train_src = " << c.data_train_src << '\n';
  out << "data.train_tgt = " << c.data_train_tgt << '\n';
  out << "data.valid_src = " << c.data_valid_src << '\n';
  out << "data.valid_tgt = " << c.data_valid_tgt << '\n';
  out << "data.test_src = " << c.data_test_src << '\n';
  out << "data.test_tgt = " << c.data_test_tgt << '\n';
  out << "bpe.enabled = " << (c.bpe_enabled ? "true" : "false") << '\n';
  out << "bpe.merges = " << c.bpe_merges << '\n';
  out << "model.d_model = " << c.model.d_model << '\n';
  out << "model.layers = " << c.model.num_layers << '\n';
  out << "model.heads = " << c.model.num_heads << '\n';
  out << "model.d_ffn = " << c.model.d_ffn << '\n';
  out << "model.dropout = " << format_double(c.model.dropout) << '\n';
  out << "model.max_len = " << c.model.max_len << '\n';
  out << "loss.family = " << to_string(c.train.loss.kind) << '\n';
  out << "loss.gamma = " << format_double(c.train.loss.gamma) << '\n';
  out << "loss.alpha = " << format_double(c.train.loss.alpha) << '\n';
  out << "loss.epsilon = " << format_double(c.train.loss.epsilon) << '\n';
  out << "optim.lr = " << format_double(c.train.optimizer.learning_rate) << '\n';
  out << "optim.warmup = " << c.train.optimizer.warmup_steps << '\n';
  out << "optim.beta1 = " << format_double(c.train.optimizer.beta1) << '\n';
  out << "optim.beta2 = " << format_double(c.train.optimizer.beta2) << '\n';
  out << "optim.eps = " << format_double(c.train.optimizer.eps) << '\n';
  out << "train.updates = " << c.train.max_updates << '\n';
  out << "train.batch_tokens = " << c.train.batch_tokens << '\n';
  out << "train.log_every = " << c.train.log_every << '\n';
  out << "decode.beam = " << c.decode.beam_size << '\n';
  out << "decode.max_len = " << c.decode.max_len << '\n';
  out << "decode.lenpen = " << format_double(c.decode.length_penalty) << '\n';
  out << "eval.tau = " << format_double(c.tau) << '\n';
  out << "eval.bins = " << c.eval_bins << '\n';
  out << "eval.splits = " << c.eval_splits << '\n';
  return out.str();
}

void save_run_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << serialize_run_config(config);
}

void RunConfig::validate() const {
  if (out_dir.empty()) throw std::invalid_argument("config: out.dir must be set");
  if (task_vocab < 5) throw std::invalid_argument("config: task.vocab must be >= 5");
  if (task_train < 1 || task_valid < 0 || task_test < 0)
    throw std::invalid_argument("config: task sizes must be positive");
  if (task_max_len < 1) throw std::invalid_argument("config: task.max_len must be >= 1");
  if (task_exponent <= 0.0)
    throw std::invalid_argument("config: task.exponent must be > 0");
  if (bpe_merges < 0) throw std::invalid_argument("config: bpe.merges must be >= 0");
  if (tau < 0.0) throw std::invalid_argument("config: eval.tau must be >= 0");
  if (eval_bins < 1) throw std::invalid_argument("config: eval.bins must be >= 1");
  if (eval_splits < 1) throw std::invalid_argument("config: eval.splits must be >= 1");

  int given = 0;
  for (const std::string* path :
       {&data_train_src, &data_train_tgt, &data_valid_src, &data_valid_tgt,
        &data_test_src, &data_test_tgt})
    if (!path->empty()) ++given;
  if (given != 0 && given != 6)
    throw std::invalid_argument("config: either all six data.* paths or none");

  train.validate();
  decode.validate();
}

}  // namespace longtail
