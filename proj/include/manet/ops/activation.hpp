#pragma once

#include <algorithm>
#include <cmath>

#include "manet/tensor.hpp"

namespace manet {

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
  Tensor<T> out = input;
  for (int64_t i = 0; i < out.size(); ++i) out[i] = std::max(T(0), out[i]);
  return out;
}

// Gradient is masked where the pre-activation was <= 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_out) {
  check(input.same_shape(grad_out), "relu backward: shape mismatch");
  Tensor<T> g = grad_out;
  for (int64_t i = 0; i < g.size(); ++i)
    if (input[i] <= T(0)) g[i] = T(0);
  return g;
}

// Row-wise two-class softmax with max subtraction.
template <typename T>
Tensor<T> softmax2_forward(const Tensor<T>& scores) {
  check(scores.ndim() == 2 && scores.dim(1) == 2, "softmax2: expects n x 2 scores");
  Tensor<T> out(scores.shape());
  for (int i = 0; i < scores.dim(0); ++i) {
    const T a = scores.at(i, 0), b = scores.at(i, 1);
    const T m = std::max(a, b);
    const T ea = std::exp(a - m), eb = std::exp(b - m);
    const T z = ea + eb;
    out.at(i, 0) = ea / z;
    out.at(i, 1) = eb / z;
  }
  return out;
}

// probs is the forward output; standard softmax Jacobian.
template <typename T>
Tensor<T> softmax2_backward(const Tensor<T>& probs, const Tensor<T>& grad_out) {
  Tensor<T> g(probs.shape());
  for (int i = 0; i < probs.dim(0); ++i) {
    const T p0 = probs.at(i, 0), p1 = probs.at(i, 1);
    const T dot = grad_out.at(i, 0) * p0 + grad_out.at(i, 1) * p1;
    g.at(i, 0) = p0 * (grad_out.at(i, 0) - dot);
    g.at(i, 1) = p1 * (grad_out.at(i, 1) - dot);
  }
  return g;
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace manet
