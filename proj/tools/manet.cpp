// Command-line front end: synthetic data generation, offline training, online
// tracking, metric evaluation, gradient checking and feature-map dumps.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "manet/checkpoint.hpp"
#include "manet/cli_commands.hpp"
#include "manet/config.hpp"

namespace fs = std::filesystem;
using namespace manet;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitCheckFailure = 3;

struct CommonArgs {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string out = "out";
  std::string data;
  std::string checkpoint;
  bool overlay = false;
  bool inject_gradient_error = false;
};

RunConfig make_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_file.empty()) cfg.load_file(args.config_file);
  for (const std::string& kv : args.overrides) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file, "key = value config file");
  cmd->add_option("--set", args.overrides, "override a config key (key=value), repeatable");
  cmd->add_option("--out", args.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"manet: two-modality multi-adapter tracker"};
  app.require_subcommand(1);
  CommonArgs args;

  CLI::App* synth = app.add_subcommand("synth", "generate synthetic paired sequences");
  add_common(synth, args);

  CLI::App* train = app.add_subcommand("train", "offline training over a sequence directory");
  add_common(train, args);
  train->add_option("--data", args.data, "directory of training sequences")->required();

  CLI::App* track = app.add_subcommand("track", "run the tracker over one sequence");
  add_common(track, args);
  track->add_option("--data", args.data, "sequence directory")->required();
  track->add_option("--checkpoint", args.checkpoint, "model checkpoint")->required();
  track->add_flag("--overlay", args.overlay, "write overlay images with gt and result boxes");

  CLI::App* eval = app.add_subcommand("eval", "compute metrics from a trajectory");
  add_common(eval, args);
  eval->add_option("--data", args.data, "sequence directory (ground truth)")->required();
  eval->add_option("--trajectory", args.checkpoint, "trajectory CSV")->required();

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks for every layer and loss");
  add_common(gradcheck, args);
  gradcheck->add_flag("--inject-error", args.inject_gradient_error)->group("");  // test-only hook

  CLI::App* dump = app.add_subcommand("dump-features", "write channel-averaged adapter feature maps");
  add_common(dump, args);
  dump->add_option("--data", args.data, "sequence directory")->required();
  dump->add_option("--checkpoint", args.checkpoint, "model checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    RunConfig cfg = make_config(args);
    fs::create_directories(args.out);
    cfg.write_echo(args.out);
    if (synth->parsed()) return cli::cmd_synth(cfg, args.out);
    if (train->parsed()) return cli::cmd_train(cfg, args.data, args.out);
    if (track->parsed()) return cli::cmd_track(cfg, args.data, args.checkpoint, args.out, args.overlay);
    if (eval->parsed()) return cli::cmd_eval(cfg, args.data, args.checkpoint, args.out);
    if (gradcheck->parsed()) {
      const int rc = cli::cmd_gradcheck(cfg, args.out, args.inject_gradient_error);
      return rc == 0 ? 0 : kExitCheckFailure;
    }
    if (dump->parsed()) return cli::cmd_dump_features(cfg, args.data, args.checkpoint, args.out);
    std::cerr << "no subcommand\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
