#pragma once

// Independent reference implementations used only by tests. These are written
// as plain nested loops straight from the operation definitions and must stay
// independent of the library's lowering choices (im2col/GEMM, cached taps,
// pair expansion).

#include <algorithm>
#include <cmath>
#include <vector>

#include "manet/bbox.hpp"
#include "manet/losses.hpp"
#include "manet/ops/layer_attrs.hpp"
#include "manet/tensor.hpp"

namespace oracle {

using manet::BBox;
using manet::ConvAttrs;
using manet::KernelFamily;
using manet::LrnAttrs;
using manet::Tensor;

// Six nested loops, zero padding handled by bounds checks.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& in, const Tensor<T>& w, const Tensor<T>& b, const ConvAttrs& a) {
  const int n = in.dim(0), ic = in.dim(1), h = in.dim(2), ww = in.dim(3);
  const int oc = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int oh = (h + 2 * a.pad - (a.dilation * (kh - 1) + 1)) / a.stride + 1;
  const int ow = (ww + 2 * a.pad - (a.dilation * (kw - 1) + 1)) / a.stride + 1;
  Tensor<T> out({n, oc, oh, ow});
  for (int s = 0; s < n; ++s)
    for (int o = 0; o < oc; ++o)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = b[o];
          for (int c = 0; c < ic; ++c)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int iy = oy * a.stride - a.pad + ky * a.dilation;
                const int ix = ox * a.stride - a.pad + kx * a.dilation;
                if (iy >= 0 && iy < h && ix >= 0 && ix < ww) acc += double(w.at(o, c, ky, kx)) * double(in.at(s, c, iy, ix));
              }
          out.at(s, o, oy, ox) = static_cast<T>(acc);
        }
  return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& bias) {
  const int n = a.dim(0), d = a.dim(1), k = b.dim(1);
  Tensor<T> out({n, k});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) {
      double acc = bias[j];
      for (int c = 0; c < d; ++c) acc += double(a.at(i, c)) * double(b.at(c, j));
      out.at(i, j) = static_cast<T>(acc);
    }
  return out;
}

// Direct per-element evaluation of the cross-channel normalization formula.
template <typename T>
Tensor<T> lrn(const Tensor<T>& in, const LrnAttrs& a) {
  const int n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
  Tensor<T> out(in.shape());
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double sum = 0;
          for (int j = std::max(0, ch - a.n / 2); j <= std::min(c - 1, ch + a.n / 2); ++j)
            sum += double(in.at(s, j, y, x)) * double(in.at(s, j, y, x));
          out.at(s, ch, y, x) = static_cast<T>(double(in.at(s, ch, y, x)) / std::pow(a.k + a.alpha * sum, a.beta));
        }
  return out;
}

template <typename T>
Tensor<T> maxpool(const Tensor<T>& in, int window, int stride) {
  const int n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
  const int oh = (h - window) / stride + 1, ow = (w - window) / stride + 1;
  Tensor<T> out({n, c, oh, ow});
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          T best = in.at(s, ch, oy * stride, ox * stride);
          for (int ky = 0; ky < window; ++ky)
            for (int kx = 0; kx < window; ++kx) best = std::max(best, in.at(s, ch, oy * stride + ky, ox * stride + kx));
          out.at(s, ch, oy, ox) = best;
        }
  return out;
}

// Scalar bilinear lookup at a continuous coordinate, pixel centers at
// half-integers, zero more than one pixel outside the map.
template <typename T>
double bilinear_at(const T* plane, int h, int w, double cy, double cx) {
  double y = cy - 0.5, x = cx - 0.5;
  if (y < -1.0 || y > h || x < -1.0 || x > w) return 0.0;
  y = std::min(std::max(y, 0.0), double(h - 1));
  x = std::min(std::max(x, 0.0), double(w - 1));
  const int y0 = int(y), x0 = int(x);
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double ly = y - y0, lx = x - x0;
  return (1 - ly) * (1 - lx) * plane[y0 * w + x0] + (1 - ly) * lx * plane[y0 * w + x1] +
         ly * (1 - lx) * plane[y1 * w + x0] + ly * lx * plane[y1 * w + x1];
}

// Per-sample-point RoIAlign: same geometry contract, independent arithmetic.
template <typename T>
Tensor<T> roialign(const Tensor<T>& feats, const BBox& box, double scale, int out_size) {
  const int c = feats.dim(1), h = feats.dim(2), w = feats.dim(3);
  Tensor<T> out({c, out_size, out_size});
  const double bx = box.x * scale, by = box.y * scale;
  const double bw = std::max(double(box.w) * scale, 1e-6), bh = std::max(double(box.h) * scale, 1e-6);
  const double bin_w = bw / out_size, bin_h = bh / out_size;
  const int gx = std::max(1, int(std::ceil(bin_w)));
  const int gy = std::max(1, int(std::ceil(bin_h)));
  for (int ch = 0; ch < c; ++ch) {
    const T* plane = feats.data() + int64_t(ch) * h * w;
    for (int i = 0; i < out_size; ++i)
      for (int j = 0; j < out_size; ++j) {
        double acc = 0;
        for (int sy = 0; sy < gy; ++sy)
          for (int sx = 0; sx < gx; ++sx)
            acc += bilinear_at(plane, h, w, by + (i + (sy + 0.5) / gy) * bin_h, bx + (j + (sx + 0.5) / gx) * bin_w);
        out[(int64_t(ch) * out_size + i) * out_size + j] = static_cast<T>(acc / (gx * gy));
      }
  }
  return out;
}

inline double kernel_scalar(const std::vector<double>& p, const std::vector<double>& q, const KernelFamily& fam) {
  double sq = 0;
  for (size_t i = 0; i < p.size(); ++i) sq += (p[i] - q[i]) * (p[i] - q[i]);
  double k = 0;
  for (int u = 0; u < fam.count(); ++u) k += fam.betas[u] * std::exp(-sq / fam.sigmas[u]);
  return k;
}

template <typename T>
std::vector<double> row(const Tensor<T>& m, int i) {
  std::vector<double> out(m.dim(1));
  for (int j = 0; j < m.dim(1); ++j) out[j] = m.at(i, j);
  return out;
}

// Hand-expanded pair sum of the unbiased estimator.
template <typename T>
double mkmmd_expanded(const Tensor<T>& x, const Tensor<T>& y, const KernelFamily& fam) {
  const int b = x.dim(0);
  double acc = 0;
  for (int i = 1; i <= b / 2; ++i) {
    auto x1 = row(x, 2 * i - 2), x2 = row(x, 2 * i - 1);
    auto y1 = row(y, 2 * i - 2), y2 = row(y, 2 * i - 1);
    acc += kernel_scalar(x1, x2, fam) + kernel_scalar(y1, y2, fam) - kernel_scalar(x1, y2, fam) -
           kernel_scalar(y1, x2, fam);
  }
  return 2.0 / b * acc;
}

}  // namespace oracle
