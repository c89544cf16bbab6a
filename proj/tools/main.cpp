#include "longtail/commands.hpp"
#include "longtail/run_config.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

namespace {

struct CliOverrides {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  double tau = -1.0;
  int beam = -1;
  double lenpen = -1.0;
};

longtail::RunConfig resolve(const CliOverrides& cli) {
  longtail::RunConfig config;
  if (!cli.config_path.empty())
    config = longtail::load_run_config(cli.config_path);
  if (!cli.out_dir.empty()) config.out_dir = cli.out_dir;
  if (cli.seed >= 0) config.seed = static_cast<std::uint64_t>(cli.seed);
  if (cli.tau >= 0.0) config.tau = cli.tau;
  if (cli.beam >= 0) config.decode.beam_size = cli.beam;
  if (cli.lenpen >= 0.0) config.decode.length_penalty = cli.lenpen;
  return config;
}

void add_globals(CLI::App* cmd, CliOverrides& cli) {
  cmd->add_option("--config", cli.config_path, "run-config file (flat dotted keys)");
  cmd->add_option("--out", cli.out_dir, "output directory");
  cmd->add_option("--seed", cli.seed, "master RNG seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"long-tail translation laboratory"};
  app.require_subcommand(1);

  CliOverrides cli;

  CLI::App* prepare = app.add_subcommand("prepare", "build corpora, BPE codec, vocabulary");
  add_globals(prepare, cli);

  CLI::App* train = app.add_subcommand("train", "train a model on prepared data");
  add_globals(train, cli);

  CLI::App* evaluate = app.add_subcommand("evaluate", "decode and report metrics");
  add_globals(evaluate, cli);
  evaluate->add_option("--beam", cli.beam, "beam size");
  evaluate->add_option("--tau", cli.tau, "tau-normalization exponent");
  evaluate->add_option("--lenpen", cli.lenpen, "length penalty for hypothesis ranking");

  CLI11_PARSE(app, argc, argv);

  try {
    longtail::RunConfig config = resolve(cli);
    if (prepare->parsed())
      longtail::cmd_prepare(config);
    else if (train->parsed())
      longtail::cmd_train(config);
    else
      longtail::cmd_evaluate(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
