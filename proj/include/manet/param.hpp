#pragma once

#include <string>
#include <vector>

#include "manet/rng.hpp"
#include "manet/tensor.hpp"

namespace manet {

// Trainable tensor plus its gradient accumulator.
template <typename T>
struct ParamBlock {
  Tensor<T> value;
  Tensor<T> grad;
  bool weight_decay_enabled = true;

  ParamBlock() = default;
  explicit ParamBlock(std::vector<int> shape) : value(shape), grad(std::move(shape)) {}

  void init_gaussian(Rng& rng, double std_dev) {
    for (int64_t i = 0; i < value.size(); ++i) value[i] = static_cast<T>(rng.normal() * std_dev);
  }

  void zero_grad() { grad.fill(T(0)); }

  void accumulate(const Tensor<T>& g) {
    check(g.same_shape(grad), "ParamBlock: gradient shape mismatch");
    for (int64_t i = 0; i < g.size(); ++i) grad[i] += g[i];
  }
};

// Vanilla SGD with L2 decay folded into the step; gradients are cleared.
template <typename T>
void sgd_step(std::vector<ParamBlock<T>*>& params, double lr, double weight_decay) {
  for (ParamBlock<T>* p : params) {
    const T wd = p->weight_decay_enabled ? static_cast<T>(weight_decay) : T(0);
    for (int64_t i = 0; i < p->value.size(); ++i) {
      p->value[i] -= static_cast<T>(lr) * (p->grad[i] + wd * p->value[i]);
      p->grad[i] = T(0);
    }
  }
}

template <typename T>
struct NamedParam {
  std::string name;
  ParamBlock<T>* param;
};

template <typename T>
struct NamedBuffer {
  std::string name;
  Tensor<T>* tensor;
};

}  // namespace manet
