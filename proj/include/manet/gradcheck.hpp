#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace manet {

// Central finite differences against an analytic gradient, double precision.
// Coordinates flagged by exclude (non-differentiable kinks: ReLU zeros, pool
// ties, |x| at zero) are skipped and counted.

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // error denominator floor, so near-zero gradients are compared absolutely
  double denom_floor = 1e-3;
  // When set, a second difference at step/2 must agree with the first; a
  // disagreement means the objective is locally non-smooth (a ReLU or pool
  // kink was crossed) and the coordinate is excluded rather than compared.
  bool kink_filter = false;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  int64_t worst_index = -1;
  int64_t checked = 0;
  int64_t excluded = 0;
  bool pass = true;

  std::string summary() const {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "max_rel_err=%.3e checked=%lld excluded=%lld %s", max_rel_err,
                  static_cast<long long>(checked), static_cast<long long>(excluded), pass ? "PASS" : "FAIL");
    return buf;
  }
};

// f evaluates the scalar objective at the current contents of x; analytic is
// the implementation's gradient at the unperturbed point. Works on any
// indexable container of doubles (std::vector, Tensor<double>).
template <typename Container, typename GradContainer>
GradCheckResult gradcheck(const std::function<double()>& f, Container& x, const GradContainer& analytic,
                          const std::function<bool(int64_t)>& exclude = nullptr, const GradCheckOptions& opts = {},
                          int64_t size = -1) {
  GradCheckResult res;
  const int64_t n = size >= 0 ? size : static_cast<int64_t>(x.size());
  for (int64_t i = 0; i < n; ++i) {
    if (exclude && exclude(i)) {
      ++res.excluded;
      continue;
    }
    const double orig = x[i];
    x[i] = orig + opts.step;
    const double fp = f();
    x[i] = orig - opts.step;
    const double fm = f();
    const double numeric = (fp - fm) / (2.0 * opts.step);
    if (opts.kink_filter) {
      x[i] = orig + opts.step / 2;
      const double fp2 = f();
      x[i] = orig - opts.step / 2;
      const double fm2 = f();
      x[i] = orig;
      const double numeric2 = (fp2 - fm2) / opts.step;
      const double gap = std::fabs(numeric - numeric2);
      if (gap > 1e-3 * std::max({std::fabs(numeric), std::fabs(numeric2), opts.denom_floor})) {
        ++res.excluded;
        continue;
      }
    }
    x[i] = orig;
    const double a = analytic[i];
    const double denom = std::max({std::fabs(a), std::fabs(numeric), opts.denom_floor});
    const double rel = std::fabs(a - numeric) / denom;
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst_index = i;
    }
    ++res.checked;
  }
  res.pass = res.max_rel_err < opts.tolerance;
  return res;
}

}  // namespace manet
