#pragma once

#include <cmath>

#include "manet/rng.hpp"
#include "manet/tensor.hpp"

namespace testutil {

template <typename T>
manet::Tensor<T> random_tensor(std::vector<int> shape, manet::Rng& rng, double lo = -1.0, double hi = 1.0) {
  manet::Tensor<T> t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
double max_abs_diff(const manet::Tensor<T>& a, const manet::Tensor<T>& b) {
  if (a.shape() != b.shape()) return 1e30;
  double m = 0;
  for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(double(a[i]) - double(b[i])));
  return m;
}

}  // namespace testutil
