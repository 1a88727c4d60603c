#pragma once

#include <Eigen/Core>

namespace manet {

// C (m x n) = alpha * A (m x k) * B (k x n) + beta * C, all row-major.
// Eigen supplies the kernels; accumulation order is fixed for a given size
// and thread count, so results are reproducible run to run.
template <typename T>
void gemm(int m, int n, int k, T alpha, const T* a, const T* b, T beta, T* c) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> ma(a, m, k);
  Eigen::Map<const Mat> mb(b, k, n);
  Eigen::Map<Mat> mc(c, m, n);
  if (beta == T(0)) {
    mc.noalias() = alpha * (ma * mb);
  } else {
    mc *= beta;
    mc.noalias() += alpha * (ma * mb);
  }
}

// C (m x n) = alpha * A^T (a is k x m) * B (k x n) + beta * C.
template <typename T>
void gemm_at(int m, int n, int k, T alpha, const T* a, const T* b, T beta, T* c) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> ma(a, k, m);
  Eigen::Map<const Mat> mb(b, k, n);
  Eigen::Map<Mat> mc(c, m, n);
  if (beta == T(0)) {
    mc.noalias() = alpha * (ma.transpose() * mb);
  } else {
    mc *= beta;
    mc.noalias() += alpha * (ma.transpose() * mb);
  }
}

// C (m x n) = alpha * A (m x k) * B^T (b is n x k) + beta * C.
template <typename T>
void gemm_bt(int m, int n, int k, T alpha, const T* a, const T* b, T beta, T* c) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> ma(a, m, k);
  Eigen::Map<const Mat> mb(b, n, k);
  Eigen::Map<Mat> mc(c, m, n);
  if (beta == T(0)) {
    mc.noalias() = alpha * (ma * mb.transpose());
  } else {
    mc *= beta;
    mc.noalias() += alpha * (ma * mb.transpose());
  }
}

}  // namespace manet
