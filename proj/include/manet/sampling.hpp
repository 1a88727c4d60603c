#pragma once

#include <vector>

#include "manet/bbox.hpp"
#include "manet/rng.hpp"
#include "manet/synthgen.hpp"
#include "manet/tensor.hpp"

namespace manet {

enum class LabelPhase { kOffline, kOnlineUpdate };

struct SampleSet {
  std::vector<BBox> boxes;
  std::vector<int> labels;  // 1 positive, 0 negative
  int frame_id = -1;
};

// Gaussian candidate cloud around a center box: translation scaled by the
// mean extent, scale as a log step clamped to +/- 2 sigma. Boxes are clamped
// into the frame with extents of at least 4 px.
std::vector<BBox> gaussian_candidates(const BBox& center, int n, double trans_sigma, double scale_sigma, int frame_w,
                                      int frame_h, Rng& rng);

// IoU-threshold labeling. Offline: positive > 0.7, negative < 0.5. Online
// update: positive > 0.7, negative < 0.3. Candidates in the gap band are
// discarded in both phases.
SampleSet label_samples(const std::vector<BBox>& candidates, const BBox& gt, LabelPhase phase);

struct MinibatchSpec {
  int frames = 8;
  int pos_per_frame = 32;
  int neg_per_frame = 96;
  int max_attempts = 10000;
};

struct FrameSamples {
  int frame_id = -1;
  std::vector<BBox> pos;
  std::vector<BBox> neg;
};

struct Minibatch {
  std::vector<FrameSamples> frames;

  int pos_count() const {
    int n = 0;
    for (const auto& f : frames) n += static_cast<int>(f.pos.size());
    return n;
  }
  int neg_count() const {
    int n = 0;
    for (const auto& f : frames) n += static_cast<int>(f.neg.size());
    return n;
  }
};

// Draws the per-iteration training batch: `spec.frames` random frames from
// one sequence, each with exact positive/negative quotas sampled by rejection
// around the ground truth.
Minibatch build_minibatch(const SequencePair& seq, const MinibatchSpec& spec, Rng& rng);

// Per-frame quota sampling used by both the trainer and the online loop.
std::vector<BBox> sample_around(const BBox& gt, int count, bool positive, LabelPhase phase, int frame_w, int frame_h,
                                Rng& rng, int max_attempts = 10000);

// Ridge regression from pooled features to the usual normalized box offsets
// (dx, dy relative to extents, log-scale dw, dh). Fit once on first-frame
// positives; refuses refitting.
class BBoxRegressor {
 public:
  explicit BBoxRegressor(double lambda = 1000.0) : lambda_(lambda) {}

  void fit(const Tensor<float>& features, const std::vector<BBox>& boxes, const BBox& gt);
  BBox refine(const BBox& box, const Tensor<float>& feature, int frame_w, int frame_h) const;
  bool trained() const { return trained_; }

  // weights exposed for tests
  const Tensor<double>& weights() const { return weights_; }

 private:
  double lambda_;
  bool trained_ = false;
  Tensor<double> weights_;  // (D+1) x 4, last row is the intercept
};

}  // namespace manet
