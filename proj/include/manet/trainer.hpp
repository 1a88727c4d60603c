#pragma once

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "manet/config.hpp"
#include "manet/losses.hpp"
#include "manet/model.hpp"
#include "manet/protocol_trace.hpp"
#include "manet/sampling.hpp"
#include "manet/synthgen.hpp"

namespace manet {

struct TrainLogEntry {
  int64_t iter = 0;
  double total = 0, cls = 0, inst = 0, hd = 0;
  double div_ga = 0, div_ma = 0;
  double nu2 = 0;
  double eta_rgb = 0, eta_thermal = 0;
};

// Shared helper: runs the backbone on one frame pair, pools the given boxes
// from the fused layer-3 maps and returns one feature row per box.
struct PooledFeatures {
  Tensor<float> rgb;      // n x 4608
  Tensor<float> thermal;  // n x 4608
};

// One-stage offline trainer: joint SGD over generality, modality and instance
// adapters with the combined classification / instance-embedding / divergence
// objective and the step schedule on the divergence weight.
class OfflineTrainer {
 public:
  OfflineTrainer(Model<float>& model, const std::vector<SequencePair>& sequences, const RunConfig& cfg,
                 ProtocolTrace* trace = nullptr);

  // Runs `iters` iterations; appends one log entry per iteration. The log
  // stream (optional) receives one CSV line per iteration.
  void run(int64_t iters, std::ostream* log_stream = nullptr);

  const std::vector<TrainLogEntry>& log() const { return log_; }

 private:
  TrainLogEntry step(int64_t iter);

  Model<float>& model_;
  const std::vector<SequencePair>& sequences_;
  RunConfig cfg_;
  ProtocolTrace* trace_;
  Rng rng_;
  std::vector<TrainLogEntry> log_;
  int64_t global_iter_ = 0;
};

// Extracts pooled per-box features for one frame with a frozen backbone
// (inference mode); used by the tracker and the feature-dump command.
PooledFeatures extract_pooled_features(Model<float>& model, const SynthFrame& frame, const std::vector<BBox>& boxes,
                                       int input_size = 0);

}  // namespace manet
