#pragma once

#include <vector>

#include "manet/rng.hpp"
#include "manet/tensor.hpp"

namespace manet {

struct DropoutCache {
  std::vector<uint8_t> keep;
  double scale = 1.0;
};

// Inverted dropout; identity when rate is 0 or not training.
template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& input, double rate, bool training, Rng* rng, DropoutCache* cache) {
  if (!training || rate <= 0) {
    if (cache) {
      cache->keep.clear();
      cache->scale = 1.0;
    }
    return input;
  }
  check(rate < 1.0, "dropout: rate must be < 1");
  check(rng != nullptr, "dropout: rng required in training mode");
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> out(input.shape());
  std::vector<uint8_t> keep(input.size());
  for (int64_t i = 0; i < input.size(); ++i) {
    keep[i] = rng->bernoulli(1.0 - rate) ? 1 : 0;
    out[i] = keep[i] ? input[i] * scale : T(0);
  }
  if (cache) {
    cache->keep = std::move(keep);
    cache->scale = scale;
  }
  return out;
}

template <typename T>
Tensor<T> dropout_backward(const DropoutCache& cache, const Tensor<T>& grad_out) {
  if (cache.keep.empty()) return grad_out;
  Tensor<T> g(grad_out.shape());
  const T scale = static_cast<T>(cache.scale);
  for (int64_t i = 0; i < g.size(); ++i) g[i] = cache.keep[i] ? grad_out[i] * scale : T(0);
  return g;
}

}  // namespace manet
