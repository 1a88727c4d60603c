#pragma once

#include <string>
#include <vector>

#include "manet/adapters/backbone.hpp"
#include "manet/adapters/instance_adapter.hpp"
#include "manet/gradcheck.hpp"
#include "manet/losses.hpp"
#include "manet/model.hpp"
#include "manet/ops/roi_align.hpp"

namespace manet {

// Finite-difference verification of every layer and loss, double precision,
// small random shapes. The CLI and the acceptance suite both run this.

struct OpCheck {
  std::string name;
  GradCheckResult result;
};

namespace detail_gc {

template <typename Fill>
Tensor<double> randn(std::vector<int> shape, Rng& rng, Fill scale) {
  Tensor<double> t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * scale;
  return t;
}

// scalar objective: sum(g .* out), with fixed random g
inline double weighted_sum(const Tensor<double>& out, const Tensor<double>& g) {
  double acc = 0;
  for (int64_t i = 0; i < out.size(); ++i) acc += out[i] * g[i];
  return acc;
}

}  // namespace detail_gc

// inject_error (test hook): corrupts one analytic gradient so the harness
// must report a failure.
std::vector<OpCheck> run_gradcheck_suite(uint64_t seed, bool inject_error = false);

inline bool all_passed(const std::vector<OpCheck>& checks) {
  for (const auto& c : checks)
    if (!c.result.pass) return false;
  return !checks.empty();
}

}  // namespace manet
