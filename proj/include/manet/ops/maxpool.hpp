#pragma once

#include <vector>

#include "manet/ops/layer_attrs.hpp"
#include "manet/tensor.hpp"

namespace manet {

struct MaxPoolCache {
  std::vector<int64_t> argmax;  // flat input index per output element
  std::vector<int> in_shape;
};

// Window max; ties go to the first element in row-major scan order.
template <typename T>
Tensor<T> maxpool_forward(const Tensor<T>& input, const PoolAttrs& a, MaxPoolCache* cache = nullptr) {
  check(input.ndim() == 4, "maxpool: input must be NCHW");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  check(a.window >= 1 && a.stride >= 1, "maxpool: bad window/stride");
  check(a.window <= h && a.window <= w,
        "maxpool: window " + std::to_string(a.window) + " exceeds input " + shape_str(input.shape()));
  const int oh = pool_out_dim(h, a.window, a.stride);
  const int ow = pool_out_dim(w, a.window, a.stride);
  Tensor<T> out({n, c, oh, ow});
  if (cache) {
    cache->argmax.assign(out.size(), 0);
    cache->in_shape = input.shape();
  }
  int64_t oi = 0;
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox, ++oi) {
          const int y0 = oy * a.stride, x0 = ox * a.stride;
          T best = input.at(s, ch, y0, x0);
          int64_t best_i = input.idx4(s, ch, y0, x0);
          for (int ky = 0; ky < a.window; ++ky) {
            for (int kx = 0; kx < a.window; ++kx) {
              const T v = input.at(s, ch, y0 + ky, x0 + kx);
              if (v > best) {
                best = v;
                best_i = input.idx4(s, ch, y0 + ky, x0 + kx);
              }
            }
          }
          out[oi] = best;
          if (cache) cache->argmax[oi] = best_i;
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> maxpool_backward(const MaxPoolCache& cache, const Tensor<T>& grad_out) {
  Tensor<T> g(cache.in_shape);
  check(static_cast<int64_t>(cache.argmax.size()) == grad_out.size(), "maxpool backward: cache mismatch");
  for (int64_t i = 0; i < grad_out.size(); ++i) g[cache.argmax[i]] += grad_out[i];
  return g;
}

}  // namespace manet
