#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace manet {

[[noreturn]] inline void fail(const std::string& msg) { throw std::invalid_argument(msg); }

inline void check(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

// Dense n-dimensional array, row-major. Scalar type is the dtype.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    for (int d : shape_) check(d >= 1, "Tensor: dimension sizes must be >= 1, got " + shape_str(shape_));
    data_.assign(numel(shape_), T(0));
  }

  Tensor(std::vector<int> shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    for (int d : shape_) check(d >= 1, "Tensor: dimension sizes must be >= 1, got " + shape_str(shape_));
    check(static_cast<int64_t>(data_.size()) == numel(shape_),
          "Tensor: data length " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
  }

  static int64_t numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(i); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](int64_t i) { return data_[i]; }
  const T& operator[](int64_t i) const { return data_[i]; }

  // 2-D / 4-D accessors; callers guarantee rank.
  T& at(int i, int j) { return data_[static_cast<int64_t>(i) * shape_[1] + j]; }
  const T& at(int i, int j) const { return data_[static_cast<int64_t>(i) * shape_[1] + j]; }
  T& at(int n, int c, int h, int w) { return data_[idx4(n, c, h, w)]; }
  const T& at(int n, int c, int h, int w) const { return data_[idx4(n, c, h, w)]; }

  int64_t idx4(int n, int c, int h, int w) const {
    return ((static_cast<int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  void reshape(std::vector<int> shape) {
    check(numel(shape) == size(), "reshape: element count mismatch " + shape_str(shape_) + " -> " + shape_str(shape));
    shape_ = std::move(shape);
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (int64_t i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.shape() == b.shape(), "tensor add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor<T> out = a;
  for (int64_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

template <typename T>
void axpy(T alpha, const Tensor<T>& x, Tensor<T>& y) {
  check(x.shape() == y.shape(), "axpy: shape mismatch");
  for (int64_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace manet
