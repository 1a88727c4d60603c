#pragma once

#include <cmath>
#include <iostream>

#include "manet/bbox.hpp"
#include "manet/tensor.hpp"

namespace manet {

// RoIAlign with an adaptive sampling grid: each of the out_size x out_size
// bins is sampled on a ceil(bin_extent) grid (at least 1 point per axis) and
// the bilinear samples are averaged. Pixel (i,j) sits at continuous
// coordinate (j + 0.5, i + 0.5), so a box aligned to the integer grid with
// 1-pixel bins reproduces the underlying crop exactly.

struct BilinearTap {
  int idx[4];
  double w[4];
};

// Continuous coordinate -> four-node bilinear tap. Points farther than one
// pixel outside the map contribute zero.
inline bool bilinear_tap(double cy, double cx, int h, int w, BilinearTap* tap) {
  double y = cy - 0.5, x = cx - 0.5;
  if (y < -1.0 || y > h || x < -1.0 || x > w) return false;
  y = std::min(std::max(y, 0.0), double(h - 1));
  x = std::min(std::max(x, 0.0), double(w - 1));
  const int y0 = static_cast<int>(y);
  const int x0 = static_cast<int>(x);
  const int y1 = std::min(y0 + 1, h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const double ly = y - y0, lx = x - x0;
  const double hy = 1.0 - ly, hx = 1.0 - lx;
  tap->idx[0] = y0 * w + x0;
  tap->idx[1] = y0 * w + x1;
  tap->idx[2] = y1 * w + x0;
  tap->idx[3] = y1 * w + x1;
  tap->w[0] = hy * hx;
  tap->w[1] = hy * lx;
  tap->w[2] = ly * hx;
  tap->w[3] = ly * lx;
  return true;
}

namespace detail {

template <typename T, typename Fn>
void roialign_visit(const BBox& box, double spatial_scale, int out_size, int h, int w, Fn&& visit) {
  check(box.valid(), "roialign: box must have positive extents");
  const double bx = box.x * spatial_scale;
  const double by = box.y * spatial_scale;
  const double bw = std::max(box.w * spatial_scale, 1e-6);
  const double bh = std::max(box.h * spatial_scale, 1e-6);
  const double bin_w = bw / out_size;
  const double bin_h = bh / out_size;
  const int grid_x = std::max(1, static_cast<int>(std::ceil(bin_w)));
  const int grid_y = std::max(1, static_cast<int>(std::ceil(bin_h)));
  const double count = double(grid_x) * grid_y;

  BilinearTap tap;
  for (int by_i = 0; by_i < out_size; ++by_i) {
    for (int bx_i = 0; bx_i < out_size; ++bx_i) {
      for (int gy = 0; gy < grid_y; ++gy) {
        const double cy = by + (by_i + (gy + 0.5) / grid_y) * bin_h;
        for (int gx = 0; gx < grid_x; ++gx) {
          const double cx = bx + (bx_i + (gx + 0.5) / grid_x) * bin_w;
          const bool in = bilinear_tap(cy, cx, h, w, &tap);
          visit(by_i, bx_i, in ? &tap : nullptr, count);
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> roialign_forward(const Tensor<T>& features, const BBox& box, double spatial_scale, int out_size) {
  check(features.ndim() == 4 && features.dim(0) == 1, "roialign: features must be 1xCxHxW");
  const int c = features.dim(1), h = features.dim(2), w = features.dim(3);
  Tensor<T> out({c, out_size, out_size});
  bool any_inside = false;
  detail::roialign_visit<T>(box, spatial_scale, out_size, h, w,
                            [&](int by_i, int bx_i, const BilinearTap* tap, double count) {
                              if (!tap) return;
                              any_inside = true;
                              for (int ch = 0; ch < c; ++ch) {
                                const T* plane = features.data() + static_cast<int64_t>(ch) * h * w;
                                double v = 0;
                                for (int i = 0; i < 4; ++i) v += tap->w[i] * double(plane[tap->idx[i]]);
                                out[(static_cast<int64_t>(ch) * out_size + by_i) * out_size + bx_i] +=
                                    static_cast<T>(v / count);
                              }
                            });
  if (!any_inside) {
    std::clog << "roialign: box (" << box.x << "," << box.y << "," << box.w << "," << box.h
              << ") lies entirely outside the feature map; returning zeros\n";
  }
  return out;
}

// Accumulates into grad_features (1xCxHxW), which the caller zero-initializes
// once per frame so many boxes can share it.
template <typename T>
void roialign_backward(const Tensor<T>& grad_out, const BBox& box, double spatial_scale, int out_size,
                       Tensor<T>& grad_features) {
  const int c = grad_features.dim(1), h = grad_features.dim(2), w = grad_features.dim(3);
  check(grad_out.ndim() == 3 && grad_out.dim(0) == c, "roialign backward: grad shape mismatch");
  detail::roialign_visit<T>(box, spatial_scale, out_size, h, w,
                            [&](int by_i, int bx_i, const BilinearTap* tap, double count) {
                              if (!tap) return;
                              for (int ch = 0; ch < c; ++ch) {
                                const T g = grad_out[(static_cast<int64_t>(ch) * out_size + by_i) * out_size + bx_i];
                                T* plane = grad_features.data() + static_cast<int64_t>(ch) * h * w;
                                for (int i = 0; i < 4; ++i)
                                  plane[tap->idx[i]] += static_cast<T>(double(g) * tap->w[i] / count);
                              }
                            });
}

}  // namespace manet
