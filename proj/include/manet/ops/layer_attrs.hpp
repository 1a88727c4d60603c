#pragma once

namespace manet {

struct ConvAttrs {
  int stride = 1;
  int pad = 0;
  int dilation = 1;
};

struct PoolAttrs {
  int window = 3;
  int stride = 2;
};

struct LrnAttrs {
  int n = 5;           // cross-channel window
  double k = 2.0;
  double alpha = 1e-4;
  double beta = 0.75;
};

struct IcAttrs {
  double momentum = 0.1;
  double eps = 1e-5;
  double dropout_rate = 0.5;
};

inline int conv_out_dim(int in, int kernel, int stride, int pad, int dilation) {
  const int eff = dilation * (kernel - 1) + 1;
  return (in + 2 * pad - eff) / stride + 1;
}

inline int pool_out_dim(int in, int window, int stride) { return (in - window) / stride + 1; }

}  // namespace manet
