#pragma once

#include <array>
#include <type_traits>

#include "manet/adapters/diag_embed.hpp"
#include "manet/ops/activation.hpp"
#include "manet/ops/conv2d.hpp"
#include "manet/ops/ic_layer.hpp"
#include "manet/ops/lrn.hpp"
#include "manet/ops/maxpool.hpp"
#include "manet/param.hpp"

namespace manet {

// Feature backbone: a three-layer generality adapter shared by both
// modalities, with a per-modality modality adapter block in parallel at every
// layer. Layer outputs of the two paths are added element-wise; the fused map
// feeds the next layer and, after layer 3, RoIAlign.
//
// Schedule (inputs of 75 px and up stay non-degenerate):
//   L1: conv 7x7/2 -> ReLU -> LRN -> maxpool 3x3/2   | 3x3/2 -> ReLU -> IC -> maxpool
//   L2: conv 5x5/2 -> ReLU -> LRN                    | 1x1/2 -> ReLU -> IC
//   L3: conv 3x3/1 dilation 3 -> ReLU                | 1x1/1 -> ReLU -> IC

constexpr int kBackboneLayers = 3;
constexpr int kGaKernel[kBackboneLayers] = {7, 5, 3};
constexpr int kMaKernel[kBackboneLayers] = {3, 1, 1};
constexpr int kLayerChannels[kBackboneLayers + 1] = {3, 96, 256, 512};
constexpr bool kHasLrn[kBackboneLayers] = {true, true, false};
constexpr bool kHasPool[kBackboneLayers] = {true, false, false};
constexpr int kBackboneStride = 8;  // cumulative: conv1/2 * pool/2 * conv2/2
constexpr int kMinBackboneInput = 75;

inline ConvAttrs backbone_conv_attrs(int layer) {
  ConvAttrs a;
  a.stride = (layer == 2) ? 1 : 2;
  a.pad = 0;
  a.dilation = (layer == 2) ? 3 : 1;
  return a;
}

// A modality-adapter convolution evaluated at the positions of the composed
// kernel: cropping the input by the embedding offset and convolving the small
// kernel is identical to convolving diag-embedded weights at full size.
inline int ma_crop_offset(int layer) {
  return (kGaKernel[layer] - kMaKernel[layer]) / 2 * backbone_conv_attrs(layer).dilation;
}

template <typename T>
Tensor<T> crop_border(const Tensor<T>& x, int off) {
  if (off == 0) return x;
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  check(h > 2 * off && w > 2 * off, "crop_border: input too small");
  Tensor<T> out({n, c, h - 2 * off, w - 2 * off});
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h - 2 * off; ++y)
        for (int xx = 0; xx < w - 2 * off; ++xx) out.at(s, ch, y, xx) = x.at(s, ch, y + off, xx + off);
  return out;
}

template <typename T>
void uncrop_border_add(const Tensor<T>& g_cropped, int off, Tensor<T>& g_full) {
  const int n = g_cropped.dim(0), c = g_cropped.dim(1), h = g_cropped.dim(2), w = g_cropped.dim(3);
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) g_full.at(s, ch, y + off, xx + off) += g_cropped.at(s, ch, y, xx);
}

template <typename T>
struct ConvLayerParams {
  ParamBlock<T> weight;
  ParamBlock<T> bias;
};

template <typename T>
struct GaWeights {
  std::array<ConvLayerParams<T>, kBackboneLayers> conv;
  LrnAttrs lrn;
  PoolAttrs pool{3, 2};

  GaWeights() {
    for (int l = 0; l < kBackboneLayers; ++l) {
      conv[l].weight = ParamBlock<T>({kLayerChannels[l + 1], kLayerChannels[l], kGaKernel[l], kGaKernel[l]});
      conv[l].bias = ParamBlock<T>({kLayerChannels[l + 1]});
      conv[l].bias.weight_decay_enabled = false;
    }
  }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& c : conv) n += c.weight.value.size() + c.bias.value.size();
    return n;
  }
};

template <typename T>
struct MaWeights {
  std::array<ConvLayerParams<T>, kBackboneLayers> conv;
  std::array<IcState<T>, kBackboneLayers> ic;
  IcAttrs ic_attrs;

  MaWeights() {
    for (int l = 0; l < kBackboneLayers; ++l) {
      conv[l].weight = ParamBlock<T>({kLayerChannels[l + 1], kLayerChannels[l], kMaKernel[l], kMaKernel[l]});
      conv[l].bias = ParamBlock<T>({kLayerChannels[l + 1]});
      conv[l].bias.weight_decay_enabled = false;
      ic[l] = IcState<T>(kLayerChannels[l + 1]);
    }
  }

  // Convolution weights and biases only; IC scale/shift counted separately.
  int64_t conv_param_count() const {
    int64_t n = 0;
    for (const auto& c : conv) n += c.weight.value.size() + c.bias.value.size();
    return n;
  }
};

template <typename T>
struct BackboneLayerCache {
  Tensor<T> in;
  Tensor<T> ga_pre;
  Tensor<T> ga_nrm;  // LRN input is relu(ga_pre), recomputed in backward
  MaxPoolCache ga_pool;
  Tensor<T> ma_in_cropped;
  Tensor<T> ma_pre;
  IcCache<T> ic;
  MaxPoolCache ma_pool;
  Tensor<T> ga_out;
  Tensor<T> ma_out;
};

template <typename T>
struct BackboneCache {
  std::array<BackboneLayerCache<T>, kBackboneLayers> layer;
  bool training = false;
};

// Forward through all three fused layers. cache is required for backward and
// for the per-layer feature taps used by the divergence loss.
template <typename T>
Tensor<T> backbone_forward(const Tensor<T>& images, GaWeights<T>& ga, MaWeights<T>& ma, bool training, Rng* rng,
                           std::type_identity_t<BackboneCache<T>>* cache) {
  check(images.ndim() == 4 && images.dim(1) == 3, "backbone: input must be Nx3xHxW");
  check(images.dim(2) >= kMinBackboneInput && images.dim(3) >= kMinBackboneInput,
        "backbone: input " + shape_str(images.shape()) + " below minimum " + std::to_string(kMinBackboneInput));
  Tensor<T> x = images;
  for (int l = 0; l < kBackboneLayers; ++l) {
    BackboneLayerCache<T> lc;
    const ConvAttrs attrs = backbone_conv_attrs(l);
    lc.in = x;

    // generality path
    lc.ga_pre = conv2d_forward(x, ga.conv[l].weight.value, ga.conv[l].bias.value, attrs);
    Tensor<T> g = relu_forward(lc.ga_pre);
    if (kHasLrn[l]) {
      lc.ga_nrm = g;
      g = lrn_forward(g, ga.lrn);
    }
    if (kHasPool[l]) g = maxpool_forward(g, ga.pool, &lc.ga_pool);
    lc.ga_out = g;

    // modality path, same output geometry via the embedding offset
    lc.ma_in_cropped = crop_border(x, ma_crop_offset(l));
    ConvAttrs ma_attrs = attrs;
    lc.ma_pre = conv2d_forward(lc.ma_in_cropped, ma.conv[l].weight.value, ma.conv[l].bias.value, ma_attrs);
    Tensor<T> m = relu_forward(lc.ma_pre);
    m = ic_forward(m, ma.ic[l], ma.ic_attrs, training, rng, &lc.ic);
    if (kHasPool[l]) m = maxpool_forward(m, ga.pool, &lc.ma_pool);
    lc.ma_out = m;

    check(lc.ga_out.same_shape(lc.ma_out), "backbone: path shapes diverged at layer " + std::to_string(l + 1));
    x = lc.ga_out + lc.ma_out;
    if (cache) cache->layer[l] = std::move(lc);
  }
  if (cache) cache->training = training;
  return x;
}

// grad_fused3: gradient w.r.t. the layer-3 fused output. tap_* (optional,
// may contain empty tensors) add per-layer gradients on the path outputs.
// Parameter gradients accumulate into the ParamBlocks.
template <typename T>
void backbone_backward(GaWeights<T>& ga, MaWeights<T>& ma, const BackboneCache<T>& cache,
                       const Tensor<T>& grad_fused3,
                       const std::type_identity_t<std::array<Tensor<T>, kBackboneLayers>>* tap_ga,
                       const std::type_identity_t<std::array<Tensor<T>, kBackboneLayers>>* tap_ma) {
  Tensor<T> g_fused = grad_fused3;
  for (int l = kBackboneLayers - 1; l >= 0; --l) {
    const BackboneLayerCache<T>& lc = cache.layer[l];
    const ConvAttrs attrs = backbone_conv_attrs(l);

    Tensor<T> g_ga = g_fused;
    Tensor<T> g_ma = g_fused;
    if (tap_ga && (*tap_ga)[l].size() > 0) axpy(T(1), (*tap_ga)[l], g_ga);
    if (tap_ma && (*tap_ma)[l].size() > 0) axpy(T(1), (*tap_ma)[l], g_ma);

    // generality path
    if (kHasPool[l]) g_ga = maxpool_backward(lc.ga_pool, g_ga);
    if (kHasLrn[l]) g_ga = lrn_backward(lc.ga_nrm, g_ga, ga.lrn);
    g_ga = relu_backward(lc.ga_pre, g_ga);
    Tensor<T> g_in_ga, g_w, g_b;
    const bool need_input = l > 0;
    conv2d_backward(lc.in, ga.conv[l].weight.value, g_ga, attrs, need_input ? &g_in_ga : nullptr, &g_w, &g_b);
    ga.conv[l].weight.accumulate(g_w);
    ga.conv[l].bias.accumulate(g_b);

    // modality path
    if (kHasPool[l]) g_ma = maxpool_backward(lc.ma_pool, g_ma);
    Tensor<T> g_gamma, g_shift;
    g_ma = ic_backward(lc.ic, ma.ic[l], std::move(g_ma), &g_gamma, &g_shift);
    ma.ic[l].gamma.accumulate(g_gamma);
    ma.ic[l].shift.accumulate(g_shift);
    g_ma = relu_backward(lc.ma_pre, g_ma);
    Tensor<T> g_in_ma_cropped;
    conv2d_backward(lc.ma_in_cropped, ma.conv[l].weight.value, g_ma, attrs, need_input ? &g_in_ma_cropped : nullptr,
                    &g_w, &g_b);
    ma.conv[l].weight.accumulate(g_w);
    ma.conv[l].bias.accumulate(g_b);

    if (need_input) {
      uncrop_border_add(g_in_ma_cropped, ma_crop_offset(l), g_in_ga);
      g_fused = std::move(g_in_ga);
    }
  }
}

}  // namespace manet
