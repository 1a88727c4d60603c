#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "manet/ops/activation.hpp"
#include "manet/tensor.hpp"

namespace manet {

// Multi-kernel family: k(p,q) = sum_u beta_u * exp(-||p-q||^2 / sigma_u).
struct KernelFamily {
  std::vector<double> sigmas;
  std::vector<double> betas;

  // d Gaussian kernels with bandwidths 2^(u-6), u = 1..d, and uniform weights
  // summing to the budget D.
  static KernelFamily make_default(int d = 11, double budget = 1.0) {
    KernelFamily f;
    f.sigmas.resize(d);
    f.betas.resize(d);
    for (int u = 1; u <= d; ++u) {
      f.sigmas[u - 1] = std::pow(2.0, u - 6);
      f.betas[u - 1] = budget / d;
    }
    return f;
  }

  int count() const { return static_cast<int>(sigmas.size()); }

  double beta_sum() const {
    double s = 0;
    for (double b : betas) s += b;
    return s;
  }
};

namespace detail {

template <typename T>
double sq_dist(const Tensor<T>& x, int i, const Tensor<T>& y, int j) {
  const int d = x.dim(1);
  double acc = 0;
  for (int c = 0; c < d; ++c) {
    const double diff = double(x.at(i, c)) - double(y.at(j, c));
    acc += diff * diff;
  }
  return acc;
}

inline double kernel_value(double sq, const KernelFamily& f) {
  double acc = 0;
  for (int u = 0; u < f.count(); ++u) acc += f.betas[u] * std::exp(-sq / f.sigmas[u]);
  return acc;
}

// d k / d sq = -sum_u beta_u / sigma_u * exp(-sq/sigma_u)
inline double kernel_dsq(double sq, const KernelFamily& f) {
  double acc = 0;
  for (int u = 0; u < f.count(); ++u) acc += -f.betas[u] / f.sigmas[u] * std::exp(-sq / f.sigmas[u]);
  return acc;
}

}  // namespace detail

template <typename T>
Tensor<T> gaussian_kernel_matrix(const Tensor<T>& x, const Tensor<T>& y, const KernelFamily& family) {
  check(x.ndim() == 2 && y.ndim() == 2 && x.dim(1) == y.dim(1), "kernel matrix: feature dims must agree");
  Tensor<T> k({x.dim(0), y.dim(0)});
  for (int i = 0; i < x.dim(0); ++i)
    for (int j = 0; j < y.dim(0); ++j) k.at(i, j) = static_cast<T>(detail::kernel_value(detail::sq_dist(x, i, y, j), family));
  return k;
}

// Unbiased two-sample estimate over consecutive row pairs:
//   psi = (2/b) * sum_{i=1}^{b/2} [ k(x_{2i-1},x_{2i}) + k(y_{2i-1},y_{2i})
//                                 - k(x_{2i-1},y_{2i}) - k(y_{2i-1},x_{2i}) ]
template <typename T>
T mkmmd_unbiased(const Tensor<T>& x, const Tensor<T>& y, const KernelFamily& family) {
  check(x.ndim() == 2 && y.ndim() == 2 && x.shape() == y.shape(), "mkmmd: samples must share shape");
  const int b = x.dim(0);
  check(b % 2 == 0, "mkmmd: batch size must be even, got " + std::to_string(b));
  check(b >= 4, "mkmmd: batch size must be >= 4");
  double acc = 0;
  for (int i = 0; i < b / 2; ++i) {
    const int a = 2 * i, c = 2 * i + 1;
    acc += detail::kernel_value(detail::sq_dist(x, a, x, c), family);
    acc += detail::kernel_value(detail::sq_dist(y, a, y, c), family);
    acc -= detail::kernel_value(detail::sq_dist(x, a, y, c), family);
    acc -= detail::kernel_value(detail::sq_dist(y, a, x, c), family);
  }
  return static_cast<T>(2.0 / b * acc);
}

// Gradient of mkmmd_unbiased w.r.t. both sample sets, scaled by upstream.
template <typename T>
void mkmmd_unbiased_backward(const Tensor<T>& x, const Tensor<T>& y, const KernelFamily& family, double upstream,
                             Tensor<T>& grad_x, Tensor<T>& grad_y) {
  const int b = x.dim(0), d = x.dim(1);
  if (!grad_x.same_shape(x)) grad_x = Tensor<T>(x.shape());
  if (!grad_y.same_shape(y)) grad_y = Tensor<T>(y.shape());
  const double scale = upstream * 2.0 / b;
  auto add_pair = [&](const Tensor<T>& p, int i, const Tensor<T>& q, int j, Tensor<T>& gp, Tensor<T>& gq,
                      double sign) {
    const double dk = detail::kernel_dsq(detail::sq_dist(p, i, q, j), family);
    for (int c = 0; c < d; ++c) {
      const double diff = double(p.at(i, c)) - double(q.at(j, c));
      const T g = static_cast<T>(sign * scale * dk * 2.0 * diff);
      gp.at(i, c) += g;
      gq.at(j, c) -= g;
    }
  };
  for (int i = 0; i < b / 2; ++i) {
    const int a = 2 * i, c = 2 * i + 1;
    add_pair(x, a, x, c, grad_x, grad_x, 1.0);
    add_pair(y, a, y, c, grad_y, grad_y, 1.0);
    add_pair(x, a, y, c, grad_x, grad_y, -1.0);
    add_pair(y, a, x, c, grad_y, grad_x, -1.0);
  }
}

// Full-pairwise biased (V-statistic) estimate, kept as a reference for the
// unbiased estimator: mean(Kxx) + mean(Kyy) - 2*mean(Kxy).
template <typename T>
T mmd_biased(const Tensor<T>& x, const Tensor<T>& y, const KernelFamily& family) {
  const int n = x.dim(0), m = y.dim(0);
  double kxx = 0, kyy = 0, kxy = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) kxx += detail::kernel_value(detail::sq_dist(x, i, x, j), family);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) kyy += detail::kernel_value(detail::sq_dist(y, i, y, j), family);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) kxy += detail::kernel_value(detail::sq_dist(x, i, y, j), family);
  return static_cast<T>(kxx / (double(n) * n) + kyy / (double(m) * m) - 2.0 * kxy / (double(n) * m));
}

// Hierarchical divergence: sum the per-layer divergences of the generality
// features and subtract those of the modality features, so minimizing the
// loss pulls shared features together and pushes specific features apart.
template <typename T>
struct LayerPair {
  Tensor<T> rgb;      // b x C
  Tensor<T> thermal;  // b x C
};

template <typename T>
struct HdBreakdown {
  std::array<T, 3> ga_terms{};
  std::array<T, 3> ma_terms{};
  T ga_sum = T(0);
  T ma_sum = T(0);
  T loss = T(0);
};

template <typename T>
HdBreakdown<T> hd_loss(const std::array<LayerPair<T>, 3>& ga, const std::array<LayerPair<T>, 3>& ma,
                       const KernelFamily& family) {
  HdBreakdown<T> out;
  for (int l = 0; l < 3; ++l) {
    out.ga_terms[l] = mkmmd_unbiased(ga[l].rgb, ga[l].thermal, family);
    out.ma_terms[l] = mkmmd_unbiased(ma[l].rgb, ma[l].thermal, family);
    out.ga_sum += out.ga_terms[l];
    out.ma_sum += out.ma_terms[l];
  }
  out.loss = out.ga_sum - out.ma_sum;
  return out;
}

template <typename T>
void hd_loss_backward(const std::array<LayerPair<T>, 3>& ga, const std::array<LayerPair<T>, 3>& ma,
                      const KernelFamily& family, double upstream, std::array<LayerPair<T>, 3>& grad_ga,
                      std::array<LayerPair<T>, 3>& grad_ma) {
  for (int l = 0; l < 3; ++l) {
    mkmmd_unbiased_backward(ga[l].rgb, ga[l].thermal, family, upstream, grad_ga[l].rgb, grad_ga[l].thermal);
    mkmmd_unbiased_backward(ma[l].rgb, ma[l].thermal, family, -upstream, grad_ma[l].rgb, grad_ma[l].thermal);
  }
}

// Mean two-class cross entropy over softmax probabilities. labels[i] is the
// true class index (1 = positive column).
template <typename T>
T bce_loss(const Tensor<T>& logits, const std::vector<int>& labels) {
  check(logits.ndim() == 2 && logits.dim(1) == 2, "bce: logits must be n x 2");
  check(static_cast<size_t>(logits.dim(0)) == labels.size(), "bce: label count mismatch");
  const int n = logits.dim(0);
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    const double a = logits.at(i, 0), b = logits.at(i, 1);
    const double m = std::max(a, b);
    const double logz = m + std::log(std::exp(a - m) + std::exp(b - m));
    acc += logz - (labels[i] == 1 ? b : a);
  }
  return static_cast<T>(acc / n);
}

// (softmax - onehot)/n, the fused softmax + cross-entropy gradient.
template <typename T>
Tensor<T> bce_loss_backward(const Tensor<T>& logits, const std::vector<int>& labels, double upstream = 1.0) {
  const int n = logits.dim(0);
  Tensor<T> g(logits.shape());
  for (int i = 0; i < n; ++i) {
    const double a = logits.at(i, 0), b = logits.at(i, 1);
    const double m = std::max(a, b);
    const double ea = std::exp(a - m), eb = std::exp(b - m);
    const double z = ea + eb;
    g.at(i, 0) = static_cast<T>(upstream * (ea / z - (labels[i] == 0 ? 1.0 : 0.0)) / n);
    g.at(i, 1) = static_cast<T>(upstream * (eb / z - (labels[i] == 1 ? 1.0 : 0.0)) / n);
  }
  return g;
}

enum class Phase { kOffline, kOnline };

struct LossConfig {
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double nu1 = 0.1;
  Phase phase = Phase::kOffline;

  static LossConfig offline() { return LossConfig{0.5, 0.5, 0.1, Phase::kOffline}; }
  static LossConfig online() { return LossConfig{1.0, 1.0, 0.1, Phase::kOnline}; }
};

// Fusion term plus weighted single-modality terms.
template <typename T>
T cls_loss(const Tensor<T>& s_fusion, const Tensor<T>& s_rgb, const Tensor<T>& s_thermal,
           const std::vector<int>& labels, const LossConfig& cfg) {
  return bce_loss(s_fusion, labels) + static_cast<T>(cfg.lambda1) * bce_loss(s_rgb, labels) +
         static_cast<T>(cfg.lambda2) * bce_loss(s_thermal, labels);
}

// Cross-domain embedding loss on positive samples: softmax over each positive
// sample's per-domain positive scores, penalizing mass outside the current
// domain. scores: n_pos x D. Returns 0 when only one domain exists.
template <typename T>
T instance_embedding_loss(const Tensor<T>& pos_scores, int current_domain) {
  check(pos_scores.ndim() == 2, "instance embedding: scores must be n x D");
  const int n = pos_scores.dim(0), d = pos_scores.dim(1);
  if (d < 2) return T(0);
  check(current_domain >= 0 && current_domain < d, "instance embedding: bad domain index");
  if (n == 0) return T(0);
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    double m = pos_scores.at(i, 0);
    for (int j = 1; j < d; ++j) m = std::max(m, double(pos_scores.at(i, j)));
    double z = 0;
    for (int j = 0; j < d; ++j) z += std::exp(double(pos_scores.at(i, j)) - m);
    acc += (m + std::log(z)) - double(pos_scores.at(i, current_domain));
  }
  return static_cast<T>(acc / n);
}

template <typename T>
Tensor<T> instance_embedding_loss_backward(const Tensor<T>& pos_scores, int current_domain, double upstream = 1.0) {
  const int n = pos_scores.dim(0), d = pos_scores.dim(1);
  Tensor<T> g(pos_scores.shape());
  if (d < 2 || n == 0) return g;
  for (int i = 0; i < n; ++i) {
    double m = pos_scores.at(i, 0);
    for (int j = 1; j < d; ++j) m = std::max(m, double(pos_scores.at(i, j)));
    double z = 0;
    for (int j = 0; j < d; ++j) z += std::exp(double(pos_scores.at(i, j)) - m);
    for (int j = 0; j < d; ++j) {
      const double p = std::exp(double(pos_scores.at(i, j)) - m) / z;
      g.at(i, j) = static_cast<T>(upstream * (p - (j == current_domain ? 1.0 : 0.0)) / n);
    }
  }
  return g;
}

// Step schedule for the divergence-loss weight.
inline double nu2_schedule(int64_t iter) {
  if (iter < 200) return 1.0;
  if (iter < 500) return 0.1;
  return 0.01;
}

template <typename T>
T total_loss(T cls, T inst, T hd, const LossConfig& cfg, int64_t iter) {
  check(cfg.phase == Phase::kOffline, "total_loss: the combined objective is offline-only");
  return cls + static_cast<T>(cfg.nu1) * inst + static_cast<T>(nu2_schedule(iter)) * hd;
}

// Spatial global average pooling: (N,C,H,W) -> (N,C), the flattening used
// before kernel evaluation in the divergence loss.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  check(x.ndim() == 4, "global_avg_pool: expects NCHW");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> out({n, c});
  const double inv = 1.0 / (double(h) * w);
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0;
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) acc += x.at(s, ch, y, xx);
      out.at(s, ch) = static_cast<T>(acc * inv);
    }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const std::vector<int>& in_shape, const Tensor<T>& grad_out) {
  Tensor<T> g(in_shape);
  const int n = in_shape[0], c = in_shape[1], h = in_shape[2], w = in_shape[3];
  const T inv = static_cast<T>(1.0 / (double(h) * w));
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch) {
      const T v = grad_out.at(s, ch) * inv;
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) g.at(s, ch, y, xx) = v;
    }
  return g;
}

}  // namespace manet
