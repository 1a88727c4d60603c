#pragma once

#include <type_traits>
#include <vector>

#include "manet/gemm.hpp"
#include "manet/ops/layer_attrs.hpp"
#include "manet/tensor.hpp"

namespace manet {

// Dilated 2-D convolution, NCHW input, OIKK kernel, im2col lowering.
// The patch matrix has one row per (ic,kh,kw) tap and one column per output
// position, so conv becomes W(O x ICK) * col(ICK x OHOW) per sample.

template <typename T>
void im2col(const T* in, int channels, int h, int w, int kh, int kw, const ConvAttrs& a, int oh, int ow, T* col) {
  const int64_t plane = static_cast<int64_t>(h) * w;
  int64_t r = 0;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx, ++r) {
        T* dst = col + r * oh * ow;
        const T* src = in + c * plane;
        const int iy0 = ky * a.dilation - a.pad;
        const int ix0 = kx * a.dilation - a.pad;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = iy0 + oy * a.stride;
          if (iy < 0 || iy >= h) {
            for (int ox = 0; ox < ow; ++ox) *dst++ = T(0);
            continue;
          }
          const T* row = src + static_cast<int64_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ix0 + ox * a.stride;
            *dst++ = (ix >= 0 && ix < w) ? row[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int channels, int h, int w, int kh, int kw, const ConvAttrs& a, int oh, int ow, T* in) {
  const int64_t plane = static_cast<int64_t>(h) * w;
  int64_t r = 0;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx, ++r) {
        const T* src = col + r * oh * ow;
        T* dst = in + c * plane;
        const int iy0 = ky * a.dilation - a.pad;
        const int ix0 = kx * a.dilation - a.pad;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = iy0 + oy * a.stride;
          if (iy < 0 || iy >= h) {
            src += ow;
            continue;
          }
          T* row = dst + static_cast<int64_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ix0 + ox * a.stride;
            if (ix >= 0 && ix < w) row[ix] += *src;
            ++src;
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                         const ConvAttrs& attrs) {
  check(input.ndim() == 4, "conv2d: input must be NCHW, got " + shape_str(input.shape()));
  check(weight.ndim() == 4, "conv2d: weight must be OIKK, got " + shape_str(weight.shape()));
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int oc = weight.dim(0), ic = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  check(c == ic, "conv2d: input has " + std::to_string(c) + " channels but kernel expects " + std::to_string(ic));
  check(bias.size() == oc, "conv2d: bias size " + std::to_string(bias.size()) + " != out channels " + std::to_string(oc));
  check(attrs.stride >= 1 && attrs.dilation >= 1 && attrs.pad >= 0, "conv2d: bad stride/dilation/pad");
  const int oh = conv_out_dim(h, kh, attrs.stride, attrs.pad, attrs.dilation);
  const int ow = conv_out_dim(w, kw, attrs.stride, attrs.pad, attrs.dilation);
  check(oh >= 1 && ow >= 1, "conv2d: empty output for input " + shape_str(input.shape()) + " kernel " +
                                shape_str(weight.shape()));

  const int k = ic * kh * kw;
  const int p = oh * ow;
  Tensor<T> out({n, oc, oh, ow});
  std::vector<T> col(static_cast<size_t>(k) * p);
  for (int s = 0; s < n; ++s) {
    im2col(input.data() + input.idx4(s, 0, 0, 0), c, h, w, kh, kw, attrs, oh, ow, col.data());
    gemm(oc, p, k, T(1), weight.data(), col.data(), T(0), out.data() + out.idx4(s, 0, 0, 0));
    T* o = out.data() + out.idx4(s, 0, 0, 0);
    for (int ochan = 0; ochan < oc; ++ochan) {
      const T b = bias[ochan];
      for (int i = 0; i < p; ++i) o[ochan * static_cast<int64_t>(p) + i] += b;
    }
  }
  return out;
}

// Gradients w.r.t. input, weight and bias. grad_input may be null when the
// upstream tensor needs no gradient (first layer on raw images).
template <typename T>
void conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out,
                     const ConvAttrs& attrs, std::type_identity_t<Tensor<T>>* grad_input,
                     std::type_identity_t<Tensor<T>>* grad_weight, std::type_identity_t<Tensor<T>>* grad_bias) {
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int oc = weight.dim(0), ic = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  const int oh = grad_out.dim(2), ow = grad_out.dim(3);
  const int k = ic * kh * kw;
  const int p = oh * ow;

  if (grad_input) *grad_input = Tensor<T>(input.shape());
  if (grad_weight) *grad_weight = Tensor<T>(weight.shape());
  if (grad_bias) *grad_bias = Tensor<T>({oc});

  std::vector<T> col(static_cast<size_t>(k) * p);
  std::vector<T> col_grad(grad_input ? static_cast<size_t>(k) * p : 0);
  for (int s = 0; s < n; ++s) {
    const T* go = grad_out.data() + grad_out.idx4(s, 0, 0, 0);
    if (grad_weight) {
      im2col(input.data() + input.idx4(s, 0, 0, 0), c, h, w, kh, kw, attrs, oh, ow, col.data());
      // dW += gO (oc x p) * col^T (p x k)
      gemm_bt(oc, k, p, T(1), go, col.data(), T(1), grad_weight->data());
    }
    if (grad_bias) {
      for (int ochan = 0; ochan < oc; ++ochan) {
        T acc = T(0);
        for (int i = 0; i < p; ++i) acc += go[ochan * static_cast<int64_t>(p) + i];
        (*grad_bias)[ochan] += acc;
      }
    }
    if (grad_input) {
      // dcol = W^T (k x oc) * gO (oc x p), then scatter back to the image.
      gemm_at(k, p, oc, T(1), weight.data(), go, T(0), col_grad.data());
      col2im(col_grad.data(), c, h, w, kh, kw, attrs, oh, ow, grad_input->data() + grad_input->idx4(s, 0, 0, 0));
    }
  }
}

}  // namespace manet
