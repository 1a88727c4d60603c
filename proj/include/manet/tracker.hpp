#pragma once

#include <deque>
#include <vector>

#include "manet/config.hpp"
#include "manet/model.hpp"
#include "manet/protocol_trace.hpp"
#include "manet/sampling.hpp"
#include "manet/synthgen.hpp"

namespace manet {

// Cached pooled features for one frame's update samples.
struct MemoryFrame {
  int64_t frame_index = 0;
  Tensor<float> pos_rgb, pos_thermal;
  Tensor<float> neg_rgb, neg_thermal;
};

// Tracking-by-detection loop. The backbone stays frozen; only the instance
// adapter trains online (first-frame initialization, then score-gated
// short-term and interval-gated long-term updates).
class Tracker {
 public:
  Tracker(Model<float>& model, const RunConfig& cfg, uint64_t seed, ProtocolTrace* trace = nullptr);

  void init(const SynthFrame& frame, const BBox& gt);

  struct StepResult {
    BBox box;
    double positive_prob = 0;  // post-softmax, gates bbox refinement at 0.5
    double logit_gap = 0;      // pre-softmax pos-neg, gates short-term update at 0
    int selected_index = -1;
  };

  // Scores candidates around the previous result, picks the argmax, applies
  // gated refinement and collects update samples. Call once per frame after
  // init, then call maybe_update().
  StepResult track(const SynthFrame& frame);
  void maybe_update();

  const BBox& last_box() const { return last_box_; }
  int64_t frame_index() const { return frame_index_; }
  int branch() const { return branch_; }
  size_t long_memory_size() const { return memory_.size(); }
  size_t short_memory_size() const { return std::min<size_t>(memory_.size(), cfg_.memory_short); }
  const BBoxRegressor& regressor() const { return regressor_; }

 private:
  void collect_memory(const SynthFrame& frame, const BBox& around);
  void train_ia(size_t memory_frames, int iters);

  Model<float>& model_;
  RunConfig cfg_;
  ProtocolTrace* trace_;
  Rng rng_;
  int branch_ = -1;
  int frame_w_ = 0, frame_h_ = 0;
  BBoxRegressor regressor_;
  std::deque<MemoryFrame> memory_;  // newest at the back; short term = tail
  BBox last_box_;
  double last_gap_ = 1.0;
  int64_t frame_index_ = 0;
  bool initialized_ = false;
};

}  // namespace manet
