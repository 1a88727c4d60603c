#pragma once

#include <type_traits>

#include "manet/gemm.hpp"
#include "manet/tensor.hpp"

namespace manet {

// out (n x k) = in (n x d) * W (d x k) + b
template <typename T>
Tensor<T> fc_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  check(input.ndim() == 2 && weight.ndim() == 2, "fc: expects 2-D input and weight");
  const int n = input.dim(0), d = input.dim(1), k = weight.dim(1);
  check(weight.dim(0) == d, "fc: inner dims disagree, input " + shape_str(input.shape()) + " weight " +
                                shape_str(weight.shape()));
  check(bias.size() == k, "fc: bias size mismatch");
  Tensor<T> out({n, k});
  gemm(n, k, d, T(1), input.data(), weight.data(), T(0), out.data());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) out.at(i, j) += bias[j];
  return out;
}

template <typename T>
void fc_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out,
                 std::type_identity_t<Tensor<T>>* grad_input, std::type_identity_t<Tensor<T>>* grad_weight,
                 std::type_identity_t<Tensor<T>>* grad_bias) {
  const int n = input.dim(0), d = input.dim(1), k = weight.dim(1);
  if (grad_input) {
    *grad_input = Tensor<T>({n, d});
    gemm_bt(n, d, k, T(1), grad_out.data(), weight.data(), T(0), grad_input->data());
  }
  if (grad_weight) {
    *grad_weight = Tensor<T>({d, k});
    gemm_at(d, k, n, T(1), input.data(), grad_out.data(), T(0), grad_weight->data());
  }
  if (grad_bias) {
    *grad_bias = Tensor<T>({k});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < k; ++j) (*grad_bias)[j] += grad_out.at(i, j);
  }
}

}  // namespace manet
