#pragma once

#include <cmath>

#include "manet/ops/layer_attrs.hpp"
#include "manet/tensor.hpp"

namespace manet {

// Cross-channel local response normalization:
//   y_c = x_c / (k + alpha * sum_{c' in window(c)} x_{c'}^2)^beta
// with a window of n channels centered at c, truncated at the edges.
template <typename T>
Tensor<T> lrn_forward(const Tensor<T>& input, const LrnAttrs& a) {
  check(input.ndim() == 4, "lrn: input must be NCHW");
  check(a.k > 0, "lrn: k must be positive");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int half = a.n / 2;
  Tensor<T> out(input.shape());
  for (int s = 0; s < n; ++s) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int ch = 0; ch < c; ++ch) {
          T acc = T(0);
          const int lo = std::max(0, ch - half), hi = std::min(c - 1, ch + half);
          for (int j = lo; j <= hi; ++j) {
            const T v = input.at(s, j, y, x);
            acc += v * v;
          }
          const T denom = std::pow(T(a.k) + T(a.alpha) * acc, T(a.beta));
          out.at(s, ch, y, x) = input.at(s, ch, y, x) / denom;
        }
      }
    }
  }
  return out;
}

// d y_c / d x_e = [c==e] * S_c^-beta - 2*alpha*beta * x_c * x_e * S_c^-(beta+1)  for e in window(c)
template <typename T>
Tensor<T> lrn_backward(const Tensor<T>& input, const Tensor<T>& grad_out, const LrnAttrs& a) {
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int half = a.n / 2;
  Tensor<T> g(input.shape());
  std::vector<T> spow(c), x(c), go(c);
  for (int s = 0; s < n; ++s) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        for (int ch = 0; ch < c; ++ch) {
          x[ch] = input.at(s, ch, y, xx);
          go[ch] = grad_out.at(s, ch, y, xx);
        }
        for (int ch = 0; ch < c; ++ch) {
          T acc = T(0);
          const int lo = std::max(0, ch - half), hi = std::min(c - 1, ch + half);
          for (int j = lo; j <= hi; ++j) acc += x[j] * x[j];
          spow[ch] = T(a.k) + T(a.alpha) * acc;
        }
        for (int e = 0; e < c; ++e) {
          T acc = go[e] * std::pow(spow[e], T(-a.beta));
          const int lo = std::max(0, e - half), hi = std::min(c - 1, e + half);
          for (int ch = lo; ch <= hi; ++ch) {
            acc -= T(2 * a.alpha * a.beta) * x[ch] * x[e] * go[ch] * std::pow(spow[ch], T(-a.beta - 1));
          }
          g.at(s, e, y, xx) = acc;
        }
      }
    }
  }
  return g;
}

}  // namespace manet
