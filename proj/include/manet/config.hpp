#pragma once

#include <map>
#include <string>

namespace manet {

// Run configuration. Every tunable default is exposed as a key so a run is
// fully described by the echoed effective config. Parsing accepts plain
// "key = value" lines with '#' comments; unknown keys are rejected.
struct RunConfig {
  uint64_t seed = 1;

  // normalization layers
  int lrn_n = 5;
  double lrn_k = 2.0;
  double lrn_alpha = 1e-4;
  double lrn_beta = 0.75;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  double dropout_rate = 0.5;

  // divergence kernel family
  int mmd_kernel_count = 11;
  double mmd_weight_budget = 1.0;

  // offline training
  int offline_iters = 1000;
  double lr = 1e-4;
  double weight_decay = 5e-4;
  int train_input_size = 107;
  std::string init_scheme = "fan_in";  // or fixed_std

  // candidate sampling
  double trans_sigma = 0.6;
  double scale_sigma = 1.0;

  // online tracking
  int init_pos = 500;
  int init_neg = 5000;
  int init_iters = 50;
  double lr_instance = 1e-3;
  double lr_other_ia = 1e-4;
  int long_interval = 10;
  int memory_long = 100;
  int memory_short = 20;
  int update_iters = 10;
  int update_pos_per_frame = 16;
  int update_neg_per_frame = 48;
  int candidates = 256;
  double ridge_lambda = 1000.0;

  // synthetic data
  int synth_width = 160;
  int synth_height = 160;
  int synth_frames = 60;
  int synth_train_seqs = 5;
  int synth_test_seqs = 2;

  void apply(const std::string& key, const std::string& value);
  void load_file(const std::string& path);
  std::string echo() const;
  void write_echo(const std::string& dir) const;
};

std::map<std::string, std::string> parse_kv_file(const std::string& path);

}  // namespace manet
