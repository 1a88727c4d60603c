#pragma once

#include "manet/tensor.hpp"

namespace manet {

// Embeds an a x b matrix into the center of an S x S zero matrix. Requires
// S-a and S-b even so the centering offset (S-a)/2 is integral. For 4-D
// kernels the embedding applies per (out-channel, in-channel) slice.

template <typename T>
Tensor<T> diag_embed2d(const Tensor<T>& small, int S) {
  check(small.ndim() == 2, "diag_embed: expects a 2-D matrix");
  const int a = small.dim(0), b = small.dim(1);
  check(S >= a && S >= b, "diag_embed: target size smaller than source");
  check((S - a) % 2 == 0 && (S - b) % 2 == 0,
        "diag_embed: parity violation, cannot center " + shape_str(small.shape()) + " in " + std::to_string(S));
  const int oy = (S - a) / 2, ox = (S - b) / 2;
  Tensor<T> out({S, S});
  for (int i = 0; i < a; ++i)
    for (int j = 0; j < b; ++j) out.at(oy + i, ox + j) = small.at(i, j);
  return out;
}

template <typename T>
Tensor<T> diag_embed4d(const Tensor<T>& small, int S) {
  check(small.ndim() == 4, "diag_embed: expects an OIKK kernel");
  const int oc = small.dim(0), ic = small.dim(1), a = small.dim(2), b = small.dim(3);
  check((S - a) % 2 == 0 && (S - b) % 2 == 0, "diag_embed: parity violation for kernel " + shape_str(small.shape()));
  const int oy = (S - a) / 2, ox = (S - b) / 2;
  Tensor<T> out({oc, ic, S, S});
  for (int o = 0; o < oc; ++o)
    for (int i = 0; i < ic; ++i)
      for (int y = 0; y < a; ++y)
        for (int x = 0; x < b; ++x) out.at(o, i, oy + y, ox + x) = small.at(o, i, y, x);
  return out;
}

// Inverse of diag_embed4d on its support: crops the centered block back out.
template <typename T>
Tensor<T> crop_center4d(const Tensor<T>& big, int a, int b) {
  const int oc = big.dim(0), ic = big.dim(1), S = big.dim(2);
  check(big.dim(3) == S, "crop_center: expects square kernels");
  check((S - a) % 2 == 0 && (S - b) % 2 == 0, "crop_center: parity violation");
  const int oy = (S - a) / 2, ox = (S - b) / 2;
  Tensor<T> out({oc, ic, a, b});
  for (int o = 0; o < oc; ++o)
    for (int i = 0; i < ic; ++i)
      for (int y = 0; y < a; ++y)
        for (int x = 0; x < b; ++x) out.at(o, i, y, x) = big.at(o, i, oy + y, ox + x);
  return out;
}

// The composed kernel: generality weights plus the center-embedded modality
// weights, so one convolution carries both parameter sets.
template <typename T>
Tensor<T> compose_weights(const Tensor<T>& ga_kernel, const Tensor<T>& ma_kernel) {
  check(ga_kernel.ndim() == 4 && ma_kernel.ndim() == 4, "compose_weights: expects OIKK kernels");
  check(ga_kernel.dim(0) == ma_kernel.dim(0) && ga_kernel.dim(1) == ma_kernel.dim(1),
        "compose_weights: channel mismatch " + shape_str(ga_kernel.shape()) + " vs " + shape_str(ma_kernel.shape()));
  return ga_kernel + diag_embed4d(ma_kernel, ga_kernel.dim(2));
}

}  // namespace manet
