#include "manet/trainer.hpp"

#include <cmath>

#include "manet/ops/maxpool.hpp"
#include "manet/ops/roi_align.hpp"

namespace manet {

namespace {

constexpr int kRoiSize = 7;
const PoolAttrs kRoiPool{3, 2};  // 7x7 -> 3x3

// RoIAlign + max pooling for a set of boxes on one frame's fused map.
// Boxes must already be in the map's image coordinate system.
Tensor<float> pool_rois(const Tensor<float>& fused_frame, const std::vector<BBox>& boxes,
                        std::vector<MaxPoolCache>* caches) {
  const int c = fused_frame.dim(1);
  const int n = static_cast<int>(boxes.size());
  Tensor<float> out({n, c * 9});
  if (caches) caches->resize(n);
  for (int i = 0; i < n; ++i) {
    Tensor<float> roi = roialign_forward(fused_frame, boxes[i], 1.0 / kBackboneStride, kRoiSize);
    roi.reshape({1, c, kRoiSize, kRoiSize});
    Tensor<float> pooled = maxpool_forward(roi, kRoiPool, caches ? &(*caches)[i] : nullptr);
    std::copy(pooled.data(), pooled.data() + pooled.size(), out.data() + static_cast<int64_t>(i) * c * 9);
  }
  return out;
}

void pool_rois_backward(const Tensor<float>& g_pooled, const std::vector<BBox>& boxes,
                        const std::vector<MaxPoolCache>& caches, Tensor<float>& grad_frame) {
  const int c = grad_frame.dim(1);
  for (size_t i = 0; i < boxes.size(); ++i) {
    Tensor<float> g({1, c, 3, 3});
    std::copy(g_pooled.data() + static_cast<int64_t>(i) * c * 9, g_pooled.data() + static_cast<int64_t>(i + 1) * c * 9,
              g.data());
    Tensor<float> g_roi = maxpool_backward(caches[i], g);
    g_roi.reshape({c, kRoiSize, kRoiSize});
    roialign_backward(g_roi, boxes[i], 1.0 / kBackboneStride, kRoiSize, grad_frame);
  }
}

BBox scale_box(const BBox& b, double s) { return BBox{float(b.x * s), float(b.y * s), float(b.w * s), float(b.h * s)}; }

Tensor<float> slice_frame(const Tensor<float>& batch, int i) {
  const int c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  Tensor<float> out({1, c, h, w});
  std::copy(batch.data() + batch.idx4(i, 0, 0, 0), batch.data() + batch.idx4(i, 0, 0, 0) + int64_t(c) * h * w,
            out.data());
  return out;
}

void add_frame_grad(const Tensor<float>& g_frame, int i, Tensor<float>& g_batch) {
  const int64_t plane = g_frame.size();
  float* dst = g_batch.data() + g_batch.idx4(i, 0, 0, 0);
  for (int64_t j = 0; j < plane; ++j) dst[j] += g_frame[j];
}

}  // namespace

OfflineTrainer::OfflineTrainer(Model<float>& model, const std::vector<SequencePair>& sequences, const RunConfig& cfg,
                               ProtocolTrace* trace)
    : model_(model), sequences_(sequences), cfg_(cfg), trace_(trace), rng_(cfg.seed) {
  check(!sequences_.empty(), "trainer: no training sequences");
  check(model_.ia.branch_count() == static_cast<int>(sequences_.size()),
        "trainer: model must carry one instance branch per training sequence");
}

void OfflineTrainer::run(int64_t iters, std::ostream* log_stream) {
  if (log_stream && global_iter_ == 0)
    *log_stream << "iter,total,cls,inst,hd,div_ga,div_ma,nu2,eta_rgb,eta_thermal\n";
  for (int64_t i = 0; i < iters; ++i) {
    TrainLogEntry e = step(global_iter_);
    if (!std::isfinite(e.total))
      throw std::runtime_error("trainer: non-finite loss at iteration " + std::to_string(global_iter_));
    log_.push_back(e);
    if (log_stream) {
      *log_stream << e.iter << "," << e.total << "," << e.cls << "," << e.inst << "," << e.hd << "," << e.div_ga << ","
                  << e.div_ma << "," << e.nu2 << "," << e.eta_rgb << "," << e.eta_thermal << "\n";
    }
    ++global_iter_;
  }
}

TrainLogEntry OfflineTrainer::step(int64_t iter) {
  const int domain = static_cast<int>(iter % sequences_.size());
  const SequencePair& seq = sequences_[domain];

  MinibatchSpec spec;
  Minibatch mb = build_minibatch(seq, spec, rng_);
  const int frames = static_cast<int>(mb.frames.size());
  const int per_frame = spec.pos_per_frame + spec.neg_per_frame;
  const int n = frames * per_frame;

  if (trace_) {
    trace_->minibatch_counts.emplace_back(mb.pos_count(), mb.neg_count());
    std::vector<std::pair<int, int>> pf;
    for (const auto& f : mb.frames) pf.emplace_back(int(f.pos.size()), int(f.neg.size()));
    trace_->per_frame_counts.push_back(std::move(pf));
  }

  // frame batches, resized to the training input size
  const int in_size = cfg_.train_input_size;
  const double im_scale = double(in_size) / seq.width;
  Tensor<float> batch_rgb({frames, 3, in_size, in_size});
  Tensor<float> batch_thermal({frames, 3, in_size, in_size});
  for (int f = 0; f < frames; ++f) {
    const SynthFrame& fr = seq.frames[mb.frames[f].frame_id];
    Tensor<float> r = to_input_tensor(fr.rgb, in_size, in_size);
    Tensor<float> t = to_input_tensor(fr.thermal, in_size, in_size);
    std::copy(r.data(), r.data() + r.size(), batch_rgb.data() + batch_rgb.idx4(f, 0, 0, 0));
    std::copy(t.data(), t.data() + t.size(), batch_thermal.data() + batch_thermal.idx4(f, 0, 0, 0));
  }

  // backbone forward, training mode
  BackboneCache<float> cache_rgb, cache_thermal;
  Tensor<float> fused_rgb = backbone_forward(batch_rgb, model_.ga, model_.ma_rgb, true, &rng_, &cache_rgb);
  Tensor<float> fused_thermal = backbone_forward(batch_thermal, model_.ga, model_.ma_thermal, true, &rng_, &cache_thermal);

  // divergence taps: spatially averaged per-layer path outputs
  KernelFamily family = KernelFamily::make_default(cfg_.mmd_kernel_count, cfg_.mmd_weight_budget);
  std::array<LayerPair<float>, 3> ga_taps, ma_taps;
  for (int l = 0; l < kBackboneLayers; ++l) {
    ga_taps[l].rgb = global_avg_pool(cache_rgb.layer[l].ga_out);
    ga_taps[l].thermal = global_avg_pool(cache_thermal.layer[l].ga_out);
    ma_taps[l].rgb = global_avg_pool(cache_rgb.layer[l].ma_out);
    ma_taps[l].thermal = global_avg_pool(cache_thermal.layer[l].ma_out);
  }

  // pooled candidate features, frame-major, positives first within a frame
  std::vector<int> labels;
  labels.reserve(n);
  Tensor<float> pooled_rgb({n, InstanceAdapter<float>::kInputDim});
  Tensor<float> pooled_thermal({n, InstanceAdapter<float>::kInputDim});
  std::vector<std::vector<BBox>> frame_boxes(frames);
  std::vector<std::vector<MaxPoolCache>> caches_rgb(frames), caches_thermal(frames);
  for (int f = 0; f < frames; ++f) {
    auto& boxes = frame_boxes[f];
    for (const BBox& b : mb.frames[f].pos) {
      boxes.push_back(scale_box(b, im_scale));
      labels.push_back(1);
    }
    for (const BBox& b : mb.frames[f].neg) {
      boxes.push_back(scale_box(b, im_scale));
      labels.push_back(0);
    }
    Tensor<float> fr_rgb = slice_frame(fused_rgb, f);
    Tensor<float> fr_thermal = slice_frame(fused_thermal, f);
    Tensor<float> pr = pool_rois(fr_rgb, boxes, &caches_rgb[f]);
    Tensor<float> pt = pool_rois(fr_thermal, boxes, &caches_thermal[f]);
    std::copy(pr.data(), pr.data() + pr.size(), pooled_rgb.data() + int64_t(f) * per_frame * pr.dim(1));
    std::copy(pt.data(), pt.data() + pt.size(), pooled_thermal.data() + int64_t(f) * per_frame * pt.dim(1));
  }

  // instance adapter
  IaCache<float> ia_cache;
  IaOutput<float> out = instance_forward(model_.ia, pooled_rgb, pooled_thermal, true, &rng_, &ia_cache);
  Tensor<float> s_fusion = out.branch_scores(domain);

  // losses
  LossConfig lcfg = LossConfig::offline();
  const float l_cls = cls_loss(s_fusion, out.scores_rgb, out.scores_thermal, labels, lcfg);

  const int k = model_.ia.branch_count();
  std::vector<int> pos_rows;
  for (int i = 0; i < n; ++i)
    if (labels[i] == 1) pos_rows.push_back(i);
  Tensor<float> pos_scores({std::max<int>(1, int(pos_rows.size())), std::max(1, k)});
  for (size_t r = 0; r < pos_rows.size(); ++r)
    for (int b = 0; b < k; ++b) pos_scores.at(int(r), b) = out.scores_all.at(pos_rows[r], 2 * b + 1);
  const float l_inst = instance_embedding_loss(pos_scores, domain);

  HdBreakdown<float> hd = hd_loss(ga_taps, ma_taps, family);
  const double nu2 = nu2_schedule(iter);
  const float total = total_loss(l_cls, l_inst, hd.loss, lcfg, iter);

  if (trace_) {
    trace_->lambda1_used.push_back(lcfg.lambda1);
    trace_->lambda2_used.push_back(lcfg.lambda2);
    trace_->nu1_used.push_back(lcfg.nu1);
    trace_->nu2_used.emplace_back(iter, nu2);
  }

  // ----- backward -----
  Tensor<float> g_scores_all({n, 2 * k});
  {
    Tensor<float> g_fusion = bce_loss_backward(s_fusion, labels);
    for (int i = 0; i < n; ++i) {
      g_scores_all.at(i, 2 * domain) += g_fusion.at(i, 0);
      g_scores_all.at(i, 2 * domain + 1) += g_fusion.at(i, 1);
    }
    Tensor<float> g_inst = instance_embedding_loss_backward(pos_scores, domain, lcfg.nu1);
    if (k >= 2)
      for (size_t r = 0; r < pos_rows.size(); ++r)
        for (int b = 0; b < k; ++b) g_scores_all.at(pos_rows[r], 2 * b + 1) += g_inst.at(int(r), b);
  }
  Tensor<float> g_s_rgb = bce_loss_backward(out.scores_rgb, labels, lcfg.lambda1);
  Tensor<float> g_s_thermal = bce_loss_backward(out.scores_thermal, labels, lcfg.lambda2);

  Tensor<float> g_pooled_rgb, g_pooled_thermal;
  instance_backward(model_.ia, ia_cache, g_scores_all, g_s_rgb, g_s_thermal, &g_pooled_rgb, &g_pooled_thermal);

  // through RoIAlign into the fused maps
  Tensor<float> g_fused_rgb(fused_rgb.shape());
  Tensor<float> g_fused_thermal(fused_thermal.shape());
  const int fdim = InstanceAdapter<float>::kInputDim;
  for (int f = 0; f < frames; ++f) {
    Tensor<float> gp({per_frame, fdim}), gt({per_frame, fdim});
    std::copy(g_pooled_rgb.data() + int64_t(f) * per_frame * fdim,
              g_pooled_rgb.data() + int64_t(f + 1) * per_frame * fdim, gp.data());
    std::copy(g_pooled_thermal.data() + int64_t(f) * per_frame * fdim,
              g_pooled_thermal.data() + int64_t(f + 1) * per_frame * fdim, gt.data());
    Tensor<float> g_frame_rgb({1, fused_rgb.dim(1), fused_rgb.dim(2), fused_rgb.dim(3)});
    Tensor<float> g_frame_thermal(g_frame_rgb.shape());
    pool_rois_backward(gp, frame_boxes[f], caches_rgb[f], g_frame_rgb);
    pool_rois_backward(gt, frame_boxes[f], caches_thermal[f], g_frame_thermal);
    add_frame_grad(g_frame_rgb, f, g_fused_rgb);
    add_frame_grad(g_frame_thermal, f, g_fused_thermal);
  }

  // divergence gradients on the taps
  std::array<LayerPair<float>, 3> g_ga_taps, g_ma_taps;
  hd_loss_backward(ga_taps, ma_taps, family, nu2, g_ga_taps, g_ma_taps);
  std::array<Tensor<float>, 3> tap_ga_rgb, tap_ga_thermal, tap_ma_rgb, tap_ma_thermal;
  for (int l = 0; l < kBackboneLayers; ++l) {
    tap_ga_rgb[l] = global_avg_pool_backward(cache_rgb.layer[l].ga_out.shape(), g_ga_taps[l].rgb);
    tap_ga_thermal[l] = global_avg_pool_backward(cache_thermal.layer[l].ga_out.shape(), g_ga_taps[l].thermal);
    tap_ma_rgb[l] = global_avg_pool_backward(cache_rgb.layer[l].ma_out.shape(), g_ma_taps[l].rgb);
    tap_ma_thermal[l] = global_avg_pool_backward(cache_thermal.layer[l].ma_out.shape(), g_ma_taps[l].thermal);
  }

  backbone_backward(model_.ga, model_.ma_rgb, cache_rgb, g_fused_rgb, &tap_ga_rgb, &tap_ma_rgb);
  backbone_backward(model_.ga, model_.ma_thermal, cache_thermal, g_fused_thermal, &tap_ga_thermal, &tap_ma_thermal);

  auto params = model_.all_params();
  sgd_step(params, cfg_.lr, cfg_.weight_decay);

  TrainLogEntry e;
  e.iter = iter;
  e.total = total;
  e.cls = l_cls;
  e.inst = l_inst;
  e.hd = hd.loss;
  e.div_ga = hd.ga_sum;
  e.div_ma = hd.ma_sum;
  e.nu2 = nu2;
  e.eta_rgb = out.eta_rgb;
  e.eta_thermal = out.eta_thermal;
  return e;
}

PooledFeatures extract_pooled_features(Model<float>& model, const SynthFrame& frame, const std::vector<BBox>& boxes,
                                       int input_size) {
  const int orig_w = frame.rgb.width;
  const double im_scale = input_size > 0 ? double(input_size) / orig_w : 1.0;
  Tensor<float> in_rgb = to_input_tensor(frame.rgb, input_size > 0 ? input_size : 0, input_size > 0 ? input_size : 0);
  Tensor<float> in_thermal =
      to_input_tensor(frame.thermal, input_size > 0 ? input_size : 0, input_size > 0 ? input_size : 0);
  Tensor<float> fused_rgb = backbone_forward(in_rgb, model.ga, model.ma_rgb, false, nullptr,
                                             static_cast<BackboneCache<float>*>(nullptr));
  Tensor<float> fused_thermal = backbone_forward(in_thermal, model.ga, model.ma_thermal, false, nullptr,
                                                 static_cast<BackboneCache<float>*>(nullptr));
  std::vector<BBox> scaled;
  scaled.reserve(boxes.size());
  for (const BBox& b : boxes) scaled.push_back(scale_box(b, im_scale));
  PooledFeatures out;
  out.rgb = pool_rois(fused_rgb, scaled, nullptr);
  out.thermal = pool_rois(fused_thermal, scaled, nullptr);
  return out;
}

}  // namespace manet
