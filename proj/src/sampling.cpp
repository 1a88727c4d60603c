#include "manet/sampling.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace manet {

std::vector<BBox> gaussian_candidates(const BBox& center, int n, double trans_sigma, double scale_sigma, int frame_w,
                                      int frame_h, Rng& rng) {
  check(n >= 1, "gaussian_candidates: need at least one candidate");
  check(center.valid(), "gaussian_candidates: invalid center box");
  std::vector<BBox> out;
  out.reserve(n);
  const double mean_extent = (center.w + center.h) / 2.0;
  for (int i = 0; i < n; ++i) {
    const double dx = trans_sigma * mean_extent * rng.normal();
    const double dy = trans_sigma * mean_extent * rng.normal();
    const double r = std::min(2.0, std::max(-2.0, rng.normal()));
    const double s = std::pow(1.05, scale_sigma * r);
    BBox b;
    b.w = float(center.w * s);
    b.h = float(center.h * s);
    b.x = float(center.cx() + dx - b.w / 2);
    b.y = float(center.cy() + dy - b.h / 2);
    out.push_back(clamp_to_frame(b, frame_w, frame_h));
  }
  return out;
}

SampleSet label_samples(const std::vector<BBox>& candidates, const BBox& gt, LabelPhase phase) {
  const double neg_threshold = phase == LabelPhase::kOffline ? 0.5 : 0.3;
  SampleSet set;
  for (const BBox& c : candidates) {
    const double v = iou(c, gt);
    if (v > 0.7) {
      set.boxes.push_back(c);
      set.labels.push_back(1);
    } else if (v < neg_threshold) {
      set.boxes.push_back(c);
      set.labels.push_back(0);
    }
    // gap band discarded
  }
  return set;
}

std::vector<BBox> sample_around(const BBox& gt, int count, bool positive, LabelPhase phase, int frame_w, int frame_h,
                                Rng& rng, int max_attempts) {
  const double neg_threshold = phase == LabelPhase::kOffline ? 0.5 : 0.3;
  std::vector<BBox> out;
  out.reserve(count);
  int attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > max_attempts)
      throw std::runtime_error("sample_around: could not reach quota of " + std::to_string(count) + " " +
                               (positive ? "positive" : "negative") + " samples in " + std::to_string(max_attempts) +
                               " attempts");
    BBox b;
    if (positive) {
      b = gaussian_candidates(gt, 1, 0.1, 0.3, frame_w, frame_h, rng)[0];
      if (iou(b, gt) > 0.7) out.push_back(b);
    } else {
      // alternate a wide local cloud with uniform placement over the frame
      if (attempts % 2 == 0) {
        b = gaussian_candidates(gt, 1, 1.0, 1.0, frame_w, frame_h, rng)[0];
      } else {
        const double s = std::pow(1.05, std::min(2.0, std::max(-2.0, rng.normal())));
        b.w = float(std::min(double(frame_w), gt.w * s));
        b.h = float(std::min(double(frame_h), gt.h * s));
        b.x = float(rng.uniform(0, frame_w - b.w));
        b.y = float(rng.uniform(0, frame_h - b.h));
        b = clamp_to_frame(b, frame_w, frame_h);
      }
      if (iou(b, gt) < neg_threshold) out.push_back(b);
    }
  }
  return out;
}

Minibatch build_minibatch(const SequencePair& seq, const MinibatchSpec& spec, Rng& rng) {
  check(seq.size() >= spec.frames,
        "build_minibatch: sequence has " + std::to_string(seq.size()) + " frames, need " + std::to_string(spec.frames));
  Minibatch mb;
  // sample distinct frames
  std::vector<int> ids(seq.size());
  for (int i = 0; i < seq.size(); ++i) ids[i] = i;
  for (int i = 0; i < spec.frames; ++i) {
    const int j = rng.uniform_int(i, seq.size() - 1);
    std::swap(ids[i], ids[j]);
  }
  for (int i = 0; i < spec.frames; ++i) {
    FrameSamples fsamples;
    fsamples.frame_id = ids[i];
    const BBox& gt = seq.frames[ids[i]].gt;
    fsamples.pos = sample_around(gt, spec.pos_per_frame, true, LabelPhase::kOffline, seq.width, seq.height, rng,
                                 spec.max_attempts);
    fsamples.neg = sample_around(gt, spec.neg_per_frame, false, LabelPhase::kOffline, seq.width, seq.height, rng,
                                 spec.max_attempts);
    mb.frames.push_back(std::move(fsamples));
  }
  return mb;
}

namespace {

// R-CNN style offsets between a sample box and the ground truth.
void box_offsets(const BBox& sample, const BBox& gt, double* t) {
  t[0] = (gt.cx() - sample.cx()) / sample.w;
  t[1] = (gt.cy() - sample.cy()) / sample.h;
  t[2] = std::log(double(gt.w) / sample.w);
  t[3] = std::log(double(gt.h) / sample.h);
}

}  // namespace

void BBoxRegressor::fit(const Tensor<float>& features, const std::vector<BBox>& boxes, const BBox& gt) {
  check(!trained_, "BBoxRegressor: already trained; the regressor is fit exactly once per sequence");
  check(features.ndim() == 2 && features.dim(0) == static_cast<int>(boxes.size()),
        "BBoxRegressor: features must be one row per box");
  check(boxes.size() >= 2, "BBoxRegressor: need at least 2 samples");
  const int n = features.dim(0);
  const int d = features.dim(1);

  using Mat = Eigen::MatrixXd;
  Mat x(n, d + 1);
  Mat y(n, 4);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = features.at(i, j);
    x(i, d) = 1.0;  // intercept column, not penalized differently here
    double t[4];
    box_offsets(boxes[i], gt, t);
    for (int j = 0; j < 4; ++j) y(i, j) = t[j];
  }

  Mat w;
  if (n < d + 1) {
    // dual form: W = X^T (X X^T + lambda I)^-1 Y
    Mat gram = x * x.transpose();
    gram.diagonal().array() += lambda_;
    w = x.transpose() * gram.ldlt().solve(y);
  } else {
    Mat gram = x.transpose() * x;
    gram.diagonal().array() += lambda_;
    w = gram.ldlt().solve(x.transpose() * y);
  }

  weights_ = Tensor<double>({d + 1, 4});
  for (int i = 0; i <= d; ++i)
    for (int j = 0; j < 4; ++j) weights_.at(i, j) = w(i, j);
  trained_ = true;
}

BBox BBoxRegressor::refine(const BBox& box, const Tensor<float>& feature, int frame_w, int frame_h) const {
  check(trained_, "BBoxRegressor: refine before fit");
  const int d = weights_.dim(0) - 1;
  check(feature.size() == d, "BBoxRegressor: feature dim mismatch");
  double t[4];
  for (int j = 0; j < 4; ++j) {
    double acc = weights_.at(d, j);
    for (int i = 0; i < d; ++i) acc += double(feature[i]) * weights_.at(i, j);
    t[j] = acc;
  }
  BBox out;
  out.w = float(box.w * std::exp(t[2]));
  out.h = float(box.h * std::exp(t[3]));
  out.x = float(box.cx() + t[0] * box.w - out.w / 2);
  out.y = float(box.cy() + t[1] * box.h - out.h / 2);
  return clamp_to_frame(out, frame_w, frame_h);
}

}  // namespace manet
