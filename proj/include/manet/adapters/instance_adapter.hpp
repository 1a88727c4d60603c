#pragma once

#include <cmath>
#include <type_traits>
#include <vector>

#include "manet/ops/activation.hpp"
#include "manet/ops/dropout.hpp"
#include "manet/ops/fully_connected.hpp"
#include "manet/param.hpp"

namespace manet {

// Quality-aware modality weight: sigmoid of the absolute mean gap between
// positive and negative probabilities over the candidate set. Always lands in
// [0.5, 1) because the argument is non-negative.
template <typename T>
T modality_weight(const std::vector<T>& pos, const std::vector<T>& neg) {
  check(!pos.empty() && pos.size() == neg.size(), "modality_weight: needs matching non-empty score arrays");
  double acc = 0;
  for (size_t i = 0; i < pos.size(); ++i) acc += double(pos[i]) - double(neg[i]);
  return sigmoid(T(std::fabs(acc / double(pos.size()))));
}

// Instance adapter head. Per modality: a shared 4608->512 encoder, a 512->2
// scoring layer whose softmax drives the modality weight, then a re-encoding
// of the re-weighted pooled features through the same shared encoder. The two
// 512-d codes are concatenated, fused to 512 and classified by one 512->2
// branch per instance/domain.
template <typename T>
struct InstanceAdapter {
  static constexpr int kInputDim = 4608;  // 512 channels x 3 x 3 after RoIAlign pooling
  static constexpr int kHiddenDim = 512;

  ParamBlock<T> fc_r_w{{kInputDim, kHiddenDim}}, fc_r_b{{kHiddenDim}};
  ParamBlock<T> fc_t_w{{kInputDim, kHiddenDim}}, fc_t_b{{kHiddenDim}};
  ParamBlock<T> wp_r_w{{kHiddenDim, 2}}, wp_r_b{{2}};
  ParamBlock<T> wp_t_w{{kHiddenDim, 2}}, wp_t_b{{2}};
  ParamBlock<T> fusion_w{{2 * kHiddenDim, kHiddenDim}}, fusion_b{{kHiddenDim}};

  struct Branch {
    ParamBlock<T> w{{kHiddenDim, 2}};
    ParamBlock<T> b{{2}};
  };
  std::vector<Branch> branches;

  double dropout_rate = 0.5;

  InstanceAdapter() {
    for (ParamBlock<T>* b : {&fc_r_b, &fc_t_b, &wp_r_b, &wp_t_b, &fusion_b}) b->weight_decay_enabled = false;
  }

  // The re-encoding layers share storage with the first-pass encoders.
  ParamBlock<T>& fc_r1_w() { return fc_r_w; }
  ParamBlock<T>& fc_r1_b() { return fc_r_b; }
  ParamBlock<T>& fc_t1_w() { return fc_t_w; }
  ParamBlock<T>& fc_t1_b() { return fc_t_b; }

  int branch_count() const { return static_cast<int>(branches.size()); }

  // Appends a freshly initialized classification branch and returns its index.
  int new_instance_head(Rng& rng, double init_std = 0.01) {
    Branch br;
    br.w.init_gaussian(rng, init_std);
    br.b.weight_decay_enabled = false;
    branches.push_back(std::move(br));
    return branch_count() - 1;
  }
};

template <typename T>
struct IaModalityCache {
  Tensor<T> input;       // pooled features n x 4608
  Tensor<T> z;           // first-pass linear output
  DropoutCache wp_drop;
  Tensor<T> wp_in;
  Tensor<T> probs;       // softmax of the scoring logits
  double diff_mean = 0;  // mean positive-negative probability gap (signed)
  T eta = T(0);
  Tensor<T> re_pre;      // re-encoded linear output
  DropoutCache re_drop;
};

template <typename T>
struct IaCache {
  IaModalityCache<T> rgb, thermal;
  Tensor<T> cat;
  Tensor<T> fusion_pre;
  DropoutCache fusion_drop;
  Tensor<T> branch_in;  // classifier input after ReLU/dropout
  bool training = false;
};

template <typename T>
struct IaOutput {
  Tensor<T> scores_all;  // n x (2*K): per-branch two-class logits
  Tensor<T> scores_rgb;  // n x 2
  Tensor<T> scores_thermal;
  T eta_rgb = T(0);
  T eta_thermal = T(0);

  // Two-class logits for one branch.
  Tensor<T> branch_scores(int k) const {
    Tensor<T> out({scores_all.dim(0), 2});
    for (int i = 0; i < out.dim(0); ++i) {
      out.at(i, 0) = scores_all.at(i, 2 * k);
      out.at(i, 1) = scores_all.at(i, 2 * k + 1);
    }
    return out;
  }
};

namespace detail {

template <typename T>
void ia_modality_forward(const Tensor<T>& pooled, ParamBlock<T>& fc_w, ParamBlock<T>& fc_b, ParamBlock<T>& wp_w,
                         ParamBlock<T>& wp_b, double dropout_rate, bool training, Rng* rng,
                         IaModalityCache<T>& mc, Tensor<T>& scores, Tensor<T>& re_encoded) {
  check(pooled.ndim() == 2 && pooled.dim(1) == InstanceAdapter<T>::kInputDim,
        "instance adapter: pooled features must be n x 4608, got " + shape_str(pooled.shape()));
  mc.input = pooled;
  mc.z = fc_forward(pooled, fc_w.value, fc_b.value);
  Tensor<T> f = relu_forward(mc.z);
  mc.wp_in = dropout_forward(f, dropout_rate, training, rng, &mc.wp_drop);
  scores = fc_forward(mc.wp_in, wp_w.value, wp_b.value);
  mc.probs = softmax2_forward(scores);

  const int n = pooled.dim(0);
  double acc = 0;
  for (int i = 0; i < n; ++i) acc += double(mc.probs.at(i, 1)) - double(mc.probs.at(i, 0));
  mc.diff_mean = acc / n;
  mc.eta = sigmoid(T(std::fabs(mc.diff_mean)));

  // Re-encode the re-weighted pooled features through the shared encoder:
  // fc(eta*x) = eta*(fc(x) - b) + b, reusing the first-pass product.
  mc.re_pre = mc.z;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < InstanceAdapter<T>::kHiddenDim; ++j)
      mc.re_pre.at(i, j) = mc.eta * (mc.z.at(i, j) - fc_b.value[j]) + fc_b.value[j];
  Tensor<T> re = relu_forward(mc.re_pre);
  re_encoded = dropout_forward(re, dropout_rate, training, rng, &mc.re_drop);
}

// Backward for one modality; g_scores combines the classification gradient on
// the scoring logits with the modality-weight path. Returns grad w.r.t. the
// pooled features.
template <typename T>
Tensor<T> ia_modality_backward(ParamBlock<T>& fc_w, ParamBlock<T>& fc_b, ParamBlock<T>& wp_w,
                               ParamBlock<T>& wp_b, const IaModalityCache<T>& mc, const Tensor<T>& g_re_encoded,
                               const Tensor<T>& g_scores_cls) {
  const int n = mc.input.dim(0);
  const int hd = InstanceAdapter<T>::kHiddenDim;

  // re-encoding pass
  Tensor<T> g_re = dropout_backward(mc.re_drop, g_re_encoded);
  g_re = relu_backward(mc.re_pre, g_re);

  // re_pre = eta*(z - b) + b
  double g_eta = 0;
  Tensor<T> g_z({n, hd});
  Tensor<T> g_b({hd});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < hd; ++j) {
      const T g = g_re.at(i, j);
      g_eta += double(g) * (double(mc.z.at(i, j)) - double(fc_b.value[j]));
      g_z.at(i, j) = mc.eta * g;
      g_b[j] += (T(1) - mc.eta) * g;
    }
  }
  fc_b.accumulate(g_b);

  // eta = sigmoid(|diff_mean|), diff_mean = mean(p1 - p0)
  const double deta = double(mc.eta) * (1.0 - double(mc.eta));
  const double sign = mc.diff_mean >= 0 ? 1.0 : -1.0;
  const double g_diff = g_eta * deta * sign / n;
  Tensor<T> g_probs({n, 2});
  for (int i = 0; i < n; ++i) {
    g_probs.at(i, 1) = T(g_diff);
    g_probs.at(i, 0) = T(-g_diff);
  }
  Tensor<T> g_scores = softmax2_backward(mc.probs, g_probs);
  axpy(T(1), g_scores_cls, g_scores);

  // scoring layer
  Tensor<T> g_wp_in, g_wp_w, g_wp_b;
  fc_backward(mc.wp_in, wp_w.value, g_scores, &g_wp_in, &g_wp_w, &g_wp_b);
  wp_w.accumulate(g_wp_w);
  wp_b.accumulate(g_wp_b);

  Tensor<T> g_f = dropout_backward(mc.wp_drop, g_wp_in);
  axpy(T(1), relu_backward(mc.z, g_f), g_z);

  // shared encoder
  Tensor<T> g_pooled, g_fc_w, g_fc_b;
  fc_backward(mc.input, fc_w.value, g_z, &g_pooled, &g_fc_w, &g_fc_b);
  fc_w.accumulate(g_fc_w);
  fc_b.accumulate(g_fc_b);
  return g_pooled;
}

}  // namespace detail

// Full head forward. Evaluates every instance branch (they are 512->2, so
// this is cheap and the embedding loss needs them all).
template <typename T>
IaOutput<T> instance_forward(InstanceAdapter<T>& ia, const Tensor<T>& pooled_rgb, const Tensor<T>& pooled_thermal,
                             bool training, Rng* rng, std::type_identity_t<IaCache<T>>* cache) {
  check(ia.branch_count() > 0, "instance adapter: no classification branch");
  check(pooled_rgb.dim(0) == pooled_thermal.dim(0), "instance adapter: modality batch sizes differ");
  IaCache<T> local;
  IaCache<T>& c = cache ? *cache : local;
  c.training = training;

  IaOutput<T> out;
  Tensor<T> re_rgb, re_thermal;
  detail::ia_modality_forward(pooled_rgb, ia.fc_r_w, ia.fc_r_b, ia.wp_r_w, ia.wp_r_b, ia.dropout_rate, training, rng,
                              c.rgb, out.scores_rgb, re_rgb);
  detail::ia_modality_forward(pooled_thermal, ia.fc_t_w, ia.fc_t_b, ia.wp_t_w, ia.wp_t_b, ia.dropout_rate, training,
                              rng, c.thermal, out.scores_thermal, re_thermal);
  out.eta_rgb = c.rgb.eta;
  out.eta_thermal = c.thermal.eta;

  const int n = pooled_rgb.dim(0);
  const int hd = InstanceAdapter<T>::kHiddenDim;
  c.cat = Tensor<T>({n, 2 * hd});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < hd; ++j) {
      c.cat.at(i, j) = re_rgb.at(i, j);
      c.cat.at(i, hd + j) = re_thermal.at(i, j);
    }
  }
  c.fusion_pre = fc_forward(c.cat, ia.fusion_w.value, ia.fusion_b.value);
  Tensor<T> fus = relu_forward(c.fusion_pre);
  c.branch_in = dropout_forward(fus, ia.dropout_rate, training, rng, &c.fusion_drop);

  const int k = ia.branch_count();
  out.scores_all = Tensor<T>({n, 2 * k});
  for (int b = 0; b < k; ++b) {
    Tensor<T> s = fc_forward(c.branch_in, ia.branches[b].w.value, ia.branches[b].b.value);
    for (int i = 0; i < n; ++i) {
      out.scores_all.at(i, 2 * b) = s.at(i, 0);
      out.scores_all.at(i, 2 * b + 1) = s.at(i, 1);
    }
  }
  return out;
}

// g_scores_all: gradient on every branch's logits (n x 2K); g_scores_rgb /
// g_scores_thermal: gradients on the single-modality logits. Returns gradients
// w.r.t. the pooled features of both modalities.
template <typename T>
void instance_backward(InstanceAdapter<T>& ia, const IaCache<T>& c, const Tensor<T>& g_scores_all,
                       const Tensor<T>& g_scores_rgb, const Tensor<T>& g_scores_thermal,
                       std::type_identity_t<Tensor<T>>* g_pooled_rgb,
                       std::type_identity_t<Tensor<T>>* g_pooled_thermal) {
  const int n = c.branch_in.dim(0);
  const int hd = InstanceAdapter<T>::kHiddenDim;
  const int k = ia.branch_count();
  check(g_scores_all.dim(0) == n && g_scores_all.dim(1) == 2 * k, "instance backward: scores_all grad shape");

  Tensor<T> g_branch_in({n, hd});
  Tensor<T> s_grad({n, 2});
  for (int b = 0; b < k; ++b) {
    for (int i = 0; i < n; ++i) {
      s_grad.at(i, 0) = g_scores_all.at(i, 2 * b);
      s_grad.at(i, 1) = g_scores_all.at(i, 2 * b + 1);
    }
    Tensor<T> g_in, g_w, g_b;
    fc_backward(c.branch_in, ia.branches[b].w.value, s_grad, &g_in, &g_w, &g_b);
    ia.branches[b].w.accumulate(g_w);
    ia.branches[b].b.accumulate(g_b);
    axpy(T(1), g_in, g_branch_in);
  }

  Tensor<T> g_fus = dropout_backward(c.fusion_drop, g_branch_in);
  g_fus = relu_backward(c.fusion_pre, g_fus);
  Tensor<T> g_cat, g_w, g_b;
  fc_backward(c.cat, ia.fusion_w.value, g_fus, &g_cat, &g_w, &g_b);
  ia.fusion_w.accumulate(g_w);
  ia.fusion_b.accumulate(g_b);

  Tensor<T> g_re_rgb({n, hd}), g_re_thermal({n, hd});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < hd; ++j) {
      g_re_rgb.at(i, j) = g_cat.at(i, j);
      g_re_thermal.at(i, j) = g_cat.at(i, hd + j);
    }
  }

  Tensor<T> gp_rgb =
      detail::ia_modality_backward(ia.fc_r_w, ia.fc_r_b, ia.wp_r_w, ia.wp_r_b, c.rgb, g_re_rgb, g_scores_rgb);
  Tensor<T> gp_thermal = detail::ia_modality_backward(ia.fc_t_w, ia.fc_t_b, ia.wp_t_w, ia.wp_t_b, c.thermal,
                                                      g_re_thermal, g_scores_thermal);
  if (g_pooled_rgb) *g_pooled_rgb = std::move(gp_rgb);
  if (g_pooled_thermal) *g_pooled_thermal = std::move(gp_thermal);
}

}  // namespace manet
