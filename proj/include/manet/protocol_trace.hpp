#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace manet {

// Counters filled by instrumented training/tracking runs so tests can assert
// the protocol settings actually used, not just the configured ones.
struct ProtocolTrace {
  // offline training
  std::vector<std::pair<int, int>> minibatch_counts;             // (pos, neg) per iteration
  std::vector<std::vector<std::pair<int, int>>> per_frame_counts;  // per iteration, per frame
  std::vector<double> lambda1_used, lambda2_used, nu1_used;
  std::vector<std::pair<int64_t, double>> nu2_used;  // (iter, nu2)

  // online tracking
  int init_pos = 0, init_neg = 0, init_iterations = 0;
  std::vector<double> online_lambda1_used, online_lambda2_used;
  std::vector<int64_t> long_update_frames;
  std::vector<int64_t> short_update_frames;
  std::vector<std::pair<int64_t, bool>> refine_events;  // (frame, refined?)
  int regressor_fits = 0;
  uint64_t backbone_checksum_before = 0;
  uint64_t backbone_checksum_after = 0;
};

}  // namespace manet
