#include "manet/tracker.hpp"

#include <cmath>
#include <iostream>

#include "manet/losses.hpp"
#include "manet/trainer.hpp"

namespace manet {

Tracker::Tracker(Model<float>& model, const RunConfig& cfg, uint64_t seed, ProtocolTrace* trace)
    : model_(model), cfg_(cfg), trace_(trace), rng_(seed), regressor_(cfg.ridge_lambda) {}

void Tracker::init(const SynthFrame& frame, const BBox& gt) {
  check(!initialized_, "tracker: already initialized");
  check(gt.valid(), "tracker: invalid ground-truth box");
  frame_w_ = frame.rgb.width;
  frame_h_ = frame.rgb.height;
  if (trace_) trace_->backbone_checksum_before = model_.backbone_checksum();

  branch_ = model_.ia.new_instance_head(rng_, 0.01);

  // first-frame sample pools use the offline labeling standard
  std::vector<BBox> pos = sample_around(gt, cfg_.init_pos, true, LabelPhase::kOffline, frame_w_, frame_h_, rng_);
  std::vector<BBox> neg = sample_around(gt, cfg_.init_neg, false, LabelPhase::kOffline, frame_w_, frame_h_, rng_);
  std::vector<BBox> all = pos;
  all.insert(all.end(), neg.begin(), neg.end());
  PooledFeatures feats = extract_pooled_features(model_, frame, all);

  MemoryFrame init_mem;
  init_mem.frame_index = 0;
  const int d = feats.rgb.dim(1);
  auto rows = [&](const Tensor<float>& src, int begin, int count) {
    Tensor<float> out({count, d});
    std::copy(src.data() + int64_t(begin) * d, src.data() + int64_t(begin + count) * d, out.data());
    return out;
  };
  const int n_pos = int(pos.size()), n_neg = int(neg.size());

  if (trace_) {
    trace_->init_pos = n_pos;
    trace_->init_neg = n_neg;
    trace_->init_iterations = cfg_.init_iters;
  }

  // initial training on the pooled first-frame samples
  {
    Tensor<float> pos_rgb = rows(feats.rgb, 0, n_pos), pos_thermal = rows(feats.thermal, 0, n_pos);
    Tensor<float> neg_rgb = rows(feats.rgb, n_pos, n_neg), neg_thermal = rows(feats.thermal, n_pos, n_neg);
    MemoryFrame pool;
    pool.pos_rgb = std::move(pos_rgb);
    pool.pos_thermal = std::move(pos_thermal);
    pool.neg_rgb = std::move(neg_rgb);
    pool.neg_thermal = std::move(neg_thermal);
    memory_.push_back(std::move(pool));
    train_ia(1, cfg_.init_iters);
    memory_.pop_back();
  }

  // bounding-box regressor, fit exactly once on the first frame's positives
  regressor_.fit(rows(feats.rgb, 0, n_pos), pos, gt);
  if (trace_) ++trace_->regressor_fits;

  last_box_ = gt;
  last_gap_ = 1.0;
  frame_index_ = 0;
  initialized_ = true;
  collect_memory(frame, gt);
}

Tracker::StepResult Tracker::track(const SynthFrame& frame) {
  check(initialized_, "tracker: not initialized");
  ++frame_index_;

  std::vector<BBox> candidates =
      gaussian_candidates(last_box_, cfg_.candidates, cfg_.trans_sigma, cfg_.scale_sigma, frame_w_, frame_h_, rng_);
  PooledFeatures feats = extract_pooled_features(model_, frame, candidates);
  IaOutput<float> out = instance_forward(model_.ia, feats.rgb, feats.thermal, false, nullptr,
                                         static_cast<IaCache<float>*>(nullptr));
  Tensor<float> scores = out.branch_scores(branch_);

  int best = 0;
  double best_gap = scores.at(0, 1) - scores.at(0, 0);
  for (int i = 1; i < scores.dim(0); ++i) {
    const double gap = scores.at(i, 1) - scores.at(i, 0);
    if (gap > best_gap) {  // strict: ties keep the lowest index
      best_gap = gap;
      best = i;
    }
  }

  StepResult res;
  res.selected_index = best;
  res.logit_gap = best_gap;
  res.positive_prob = 1.0 / (1.0 + std::exp(-best_gap));
  res.box = candidates[best];

  const bool refine = res.positive_prob > 0.5;
  if (refine) {
    Tensor<float> feature({InstanceAdapter<float>::kInputDim});
    std::copy(feats.rgb.data() + int64_t(best) * feature.size(),
              feats.rgb.data() + int64_t(best + 1) * feature.size(), feature.data());
    res.box = regressor_.refine(res.box, feature, frame_w_, frame_h_);
  }
  if (trace_) trace_->refine_events.emplace_back(frame_index_, refine);

  last_box_ = res.box;
  last_gap_ = best_gap;
  if (best_gap > 0) collect_memory(frame, res.box);
  return res;
}

void Tracker::collect_memory(const SynthFrame& frame, const BBox& around) {
  MemoryFrame mem;
  mem.frame_index = frame_index_;
  try {
    std::vector<BBox> pos = sample_around(around, cfg_.update_pos_per_frame, true, LabelPhase::kOnlineUpdate, frame_w_,
                                          frame_h_, rng_);
    std::vector<BBox> neg = sample_around(around, cfg_.update_neg_per_frame, false, LabelPhase::kOnlineUpdate,
                                          frame_w_, frame_h_, rng_);
    std::vector<BBox> all = pos;
    all.insert(all.end(), neg.begin(), neg.end());
    PooledFeatures feats = extract_pooled_features(model_, frame, all);
    const int d = feats.rgb.dim(1);
    auto rows = [&](const Tensor<float>& src, int begin, int count) {
      Tensor<float> out({count, d});
      std::copy(src.data() + int64_t(begin) * d, src.data() + int64_t(begin + count) * d, out.data());
      return out;
    };
    mem.pos_rgb = rows(feats.rgb, 0, int(pos.size()));
    mem.pos_thermal = rows(feats.thermal, 0, int(pos.size()));
    mem.neg_rgb = rows(feats.rgb, int(pos.size()), int(neg.size()));
    mem.neg_thermal = rows(feats.thermal, int(pos.size()), int(neg.size()));
  } catch (const std::exception& e) {
    std::clog << "tracker: skipping memory collection at frame " << frame_index_ << ": " << e.what() << "\n";
    return;
  }
  memory_.push_back(std::move(mem));
  while (memory_.size() > size_t(cfg_.memory_long)) memory_.pop_front();
}

void Tracker::maybe_update() {
  check(initialized_, "tracker: not initialized");
  if (last_gap_ < 0) {
    if (memory_.empty()) {
      std::clog << "tracker: short-term update skipped, empty memory\n";
    } else {
      if (trace_) trace_->short_update_frames.push_back(frame_index_);
      train_ia(std::min<size_t>(memory_.size(), cfg_.memory_short), cfg_.update_iters);
    }
  }
  if (frame_index_ % cfg_.long_interval == 0) {
    if (memory_.empty()) {
      std::clog << "tracker: long-term update skipped, empty memory\n";
    } else {
      if (trace_) trace_->long_update_frames.push_back(frame_index_);
      train_ia(memory_.size(), cfg_.update_iters);
    }
  }
}

// Trains the instance adapter on batches drawn from the newest
// `memory_frames` entries. Backbone parameters are never touched.
void Tracker::train_ia(size_t memory_frames, int iters) {
  const size_t begin = memory_.size() - memory_frames;
  int64_t total_pos = 0, total_neg = 0;
  for (size_t i = begin; i < memory_.size(); ++i) {
    total_pos += memory_[i].pos_rgb.dim(0);
    total_neg += memory_[i].neg_rgb.dim(0);
  }
  check(total_pos > 0 && total_neg > 0, "tracker: memory has no samples");

  const int batch_pos = 32, batch_neg = 96;
  const int d = InstanceAdapter<float>::kInputDim;
  LossConfig lcfg = LossConfig::online();

  std::vector<ParamBlock<float>*> shared = model_.ia_params(false);
  std::vector<ParamBlock<float>*> branch{&model_.ia.branches[branch_].w, &model_.ia.branches[branch_].b};

  for (int it = 0; it < iters; ++it) {
    Tensor<float> rgb({batch_pos + batch_neg, d}), thermal({batch_pos + batch_neg, d});
    std::vector<int> labels(batch_pos + batch_neg);
    auto draw = [&](bool positive, int row) {
      int64_t idx = int64_t(rng_.uniform() * double(positive ? total_pos : total_neg));
      if (idx >= (positive ? total_pos : total_neg)) idx = (positive ? total_pos : total_neg) - 1;
      for (size_t i = begin; i < memory_.size(); ++i) {
        const Tensor<float>& src_rgb = positive ? memory_[i].pos_rgb : memory_[i].neg_rgb;
        const Tensor<float>& src_thermal = positive ? memory_[i].pos_thermal : memory_[i].neg_thermal;
        if (idx < src_rgb.dim(0)) {
          std::copy(src_rgb.data() + idx * d, src_rgb.data() + (idx + 1) * d, rgb.data() + int64_t(row) * d);
          std::copy(src_thermal.data() + idx * d, src_thermal.data() + (idx + 1) * d,
                    thermal.data() + int64_t(row) * d);
          return;
        }
        idx -= src_rgb.dim(0);
      }
    };
    for (int i = 0; i < batch_pos; ++i) {
      draw(true, i);
      labels[i] = 1;
    }
    for (int i = 0; i < batch_neg; ++i) {
      draw(false, batch_pos + i);
      labels[batch_pos + i] = 0;
    }

    IaCache<float> cache;
    IaOutput<float> out = instance_forward(model_.ia, rgb, thermal, true, &rng_, &cache);
    Tensor<float> s_fusion = out.branch_scores(branch_);

    if (trace_) {
      trace_->online_lambda1_used.push_back(lcfg.lambda1);
      trace_->online_lambda2_used.push_back(lcfg.lambda2);
    }

    const int k = model_.ia.branch_count();
    Tensor<float> g_all({batch_pos + batch_neg, 2 * k});
    Tensor<float> g_fusion = bce_loss_backward(s_fusion, labels);
    for (int i = 0; i < g_fusion.dim(0); ++i) {
      g_all.at(i, 2 * branch_) += g_fusion.at(i, 0);
      g_all.at(i, 2 * branch_ + 1) += g_fusion.at(i, 1);
    }
    Tensor<float> g_rgb = bce_loss_backward(out.scores_rgb, labels, lcfg.lambda1);
    Tensor<float> g_thermal = bce_loss_backward(out.scores_thermal, labels, lcfg.lambda2);
    instance_backward(model_.ia, cache, g_all, g_rgb, g_thermal, nullptr, nullptr);

    sgd_step(shared, cfg_.lr_other_ia, cfg_.weight_decay);
    sgd_step(branch, cfg_.lr_instance, cfg_.weight_decay);
    // stale branches collected zero gradients; clear them for cleanliness
    for (int b = 0; b < k; ++b) {
      if (b == branch_) continue;
      model_.ia.branches[b].w.zero_grad();
      model_.ia.branches[b].b.zero_grad();
    }
  }
}

}  // namespace manet
