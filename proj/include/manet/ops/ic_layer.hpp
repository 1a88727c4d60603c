#pragma once

#include <cmath>

#include <type_traits>

#include "manet/ops/layer_attrs.hpp"
#include "manet/param.hpp"
#include "manet/rng.hpp"
#include "manet/tensor.hpp"

namespace manet {

// IC layer: per-channel batch normalization followed by dropout.
// Training uses batch statistics (updating running estimates) and an
// inverted-dropout mask; inference uses the running statistics and no dropout.

template <typename T>
struct IcState {
  ParamBlock<T> gamma;     // learned scale
  ParamBlock<T> shift;     // learned shift
  Tensor<T> running_mean;
  Tensor<T> running_var;

  explicit IcState(int channels = 1)
      : gamma({std::vector<int>{channels}}), shift({std::vector<int>{channels}}), running_mean({channels}),
        running_var({channels}) {
    gamma.value.fill(T(1));
    running_var.fill(T(1));
    gamma.weight_decay_enabled = false;
    shift.weight_decay_enabled = false;
  }
  int channels() const { return gamma.value.dim(0); }
};

template <typename T>
struct IcCache {
  Tensor<T> xhat;
  Tensor<T> inv_std;       // per channel
  std::vector<uint8_t> keep;
  T keep_scale = T(1);
  bool training = false;
};

template <typename T>
Tensor<T> ic_forward(const Tensor<T>& input, IcState<T>& state, const IcAttrs& a, bool training, Rng* rng,
                     std::type_identity_t<IcCache<T>>* cache) {
  check(input.ndim() == 4, "ic: input must be NCHW");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  check(c == state.channels(), "ic: channel mismatch");
  const int64_t m = static_cast<int64_t>(n) * h * w;
  Tensor<T> out(input.shape());
  Tensor<T> xhat(input.shape());
  Tensor<T> inv_std({c});

  if (training) {
    check(m >= 2, "ic: training mode needs at least 2 values per channel for batch statistics");
    for (int ch = 0; ch < c; ++ch) {
      T mean = T(0);
      for (int s = 0; s < n; ++s)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) mean += input.at(s, ch, y, x);
      mean /= T(m);
      T var = T(0);
      for (int s = 0; s < n; ++s)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const T d = input.at(s, ch, y, x) - mean;
            var += d * d;
          }
      var /= T(m);
      const T is = T(1) / std::sqrt(var + T(a.eps));
      inv_std[ch] = is;
      state.running_mean[ch] = T(1 - a.momentum) * state.running_mean[ch] + T(a.momentum) * mean;
      state.running_var[ch] = T(1 - a.momentum) * state.running_var[ch] + T(a.momentum) * var;
      for (int s = 0; s < n; ++s)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const T xh = (input.at(s, ch, y, x) - mean) * is;
            xhat.at(s, ch, y, x) = xh;
            out.at(s, ch, y, x) = state.gamma.value[ch] * xh + state.shift.value[ch];
          }
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      const T is = T(1) / std::sqrt(state.running_var[ch] + T(a.eps));
      inv_std[ch] = is;
      for (int s = 0; s < n; ++s)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const T xh = (input.at(s, ch, y, x) - state.running_mean[ch]) * is;
            xhat.at(s, ch, y, x) = xh;
            out.at(s, ch, y, x) = state.gamma.value[ch] * xh + state.shift.value[ch];
          }
    }
  }

  if (cache) {
    cache->xhat = xhat;
    cache->inv_std = inv_std;
    cache->training = training;
    cache->keep.clear();
    cache->keep_scale = T(1);
  }
  if (training && a.dropout_rate > 0) {
    check(rng != nullptr, "ic: dropout needs an rng in training mode");
    const T scale = T(1) / T(1 - a.dropout_rate);
    std::vector<uint8_t> keep(out.size());
    for (int64_t i = 0; i < out.size(); ++i) {
      keep[i] = rng->bernoulli(1.0 - a.dropout_rate) ? 1 : 0;
      out[i] = keep[i] ? out[i] * scale : T(0);
    }
    if (cache) {
      cache->keep = std::move(keep);
      cache->keep_scale = scale;
    }
  }
  return out;
}

template <typename T>
Tensor<T> ic_backward(const IcCache<T>& cache, const IcState<T>& state, Tensor<T> grad_out,
                      std::type_identity_t<Tensor<T>>* grad_gamma, std::type_identity_t<Tensor<T>>* grad_shift) {
  if (!cache.keep.empty()) {
    for (int64_t i = 0; i < grad_out.size(); ++i) grad_out[i] = cache.keep[i] ? grad_out[i] * cache.keep_scale : T(0);
  }
  const Tensor<T>& xhat = cache.xhat;
  const int n = xhat.dim(0), c = xhat.dim(1), h = xhat.dim(2), w = xhat.dim(3);
  const int64_t m = static_cast<int64_t>(n) * h * w;
  if (grad_gamma) *grad_gamma = Tensor<T>({c});
  if (grad_shift) *grad_shift = Tensor<T>({c});
  Tensor<T> g(xhat.shape());

  for (int ch = 0; ch < c; ++ch) {
    T sum_g = T(0), sum_gx = T(0);
    for (int s = 0; s < n; ++s)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const T go = grad_out.at(s, ch, y, x);
          sum_g += go;
          sum_gx += go * xhat.at(s, ch, y, x);
        }
    if (grad_gamma) (*grad_gamma)[ch] = sum_gx;
    if (grad_shift) (*grad_shift)[ch] = sum_g;
    const T gamma = state.gamma.value[ch];
    const T is = cache.inv_std[ch];
    if (cache.training) {
      // d/dx of batch norm: gamma * inv_std * (g - mean(g) - xhat * mean(g*xhat))
      for (int s = 0; s < n; ++s)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const T go = grad_out.at(s, ch, y, x);
            g.at(s, ch, y, x) =
                gamma * is * (go - sum_g / T(m) - xhat.at(s, ch, y, x) * (sum_gx / T(m)));
          }
    } else {
      for (int s = 0; s < n; ++s)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) g.at(s, ch, y, x) = grad_out.at(s, ch, y, x) * gamma * is;
    }
  }
  return g;
}

}  // namespace manet
