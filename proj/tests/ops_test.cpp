#include <doctest.h>

#include "manet/ops/activation.hpp"
#include "manet/ops/conv2d.hpp"
#include "manet/ops/dropout.hpp"
#include "manet/ops/fully_connected.hpp"
#include "manet/ops/ic_layer.hpp"
#include "manet/ops/lrn.hpp"
#include "manet/ops/maxpool.hpp"
#include "manet/ops/roi_align.hpp"
#include "manet/param.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace manet;
using testutil::max_abs_diff;
using testutil::random_tensor;

TEST_CASE("conv2d zero input gives zero output") {
  Tensor<double> in({1, 1, 3, 3});
  Tensor<double> w({2, 1, 3, 3});
  Rng rng(7);
  for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1, 1);
  Tensor<double> b({2});
  auto out = conv2d_forward(in, w, b, ConvAttrs{1, 1, 1});
  for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("conv2d identity kernel reproduces input") {
  Rng rng(3);
  auto in = random_tensor<double>({1, 1, 3, 3}, rng);
  Tensor<double> w({1, 1, 1, 1});
  w[0] = 1.0;
  Tensor<double> b({1});
  auto out = conv2d_forward(in, w, b, ConvAttrs{1, 0, 1});
  CHECK(max_abs_diff(in, out) == 0.0);
}

TEST_CASE("conv2d with dilation matches nested-loop oracle") {
  Rng rng(11);
  auto in = random_tensor<double>({2, 3, 8, 8}, rng);
  auto w = random_tensor<double>({4, 3, 3, 3}, rng);
  auto b = random_tensor<double>({4}, rng);
  ConvAttrs a{1, 3, 3};
  auto fast = conv2d_forward(in, w, b, a);
  auto ref = oracle::conv2d(in, w, b, a);
  CHECK(fast.shape() == ref.shape());
  CHECK(max_abs_diff(fast, ref) < 1e-10);
}

TEST_CASE("conv2d strided against oracle plus shape preservation with matched pad") {
  Rng rng(13);
  for (int k : {3, 5, 7}) {
    const int d = 2;
    auto in = random_tensor<double>({1, 2, 11, 11}, rng);
    auto w = random_tensor<double>({3, 2, k, k}, rng);
    auto b = random_tensor<double>({3}, rng);
    ConvAttrs a{1, d * (k - 1) / 2, d};
    auto out = conv2d_forward(in, w, b, a);
    CHECK(out.dim(2) == 11);  // pad = d*(k-1)/2 keeps spatial size for odd k
    CHECK(max_abs_diff(out, oracle::conv2d(in, w, b, a)) < 1e-10);
  }
}

TEST_CASE("conv2d rejects bad shapes and empty outputs") {
  Tensor<double> in({1, 2, 5, 5});
  Tensor<double> w({1, 3, 3, 3});
  Tensor<double> b({1});
  CHECK_THROWS_AS(conv2d_forward(in, w, b, ConvAttrs{}), std::invalid_argument);
  Tensor<double> w2({1, 2, 3, 3});
  CHECK_THROWS_AS(conv2d_forward(in, w2, b, ConvAttrs{1, 0, 3}), std::invalid_argument);  // eff kernel 7 > 5
}

TEST_CASE("conv2d backward matches oracle-based numeric reconstruction") {
  // gradient wrt weights equals conv of input with grad_out pattern; verify
  // via the direct definition sum instead.
  Rng rng(17);
  auto in = random_tensor<double>({1, 2, 6, 6}, rng);
  auto w = random_tensor<double>({3, 2, 3, 3}, rng);
  auto b = random_tensor<double>({3}, rng);
  ConvAttrs a{2, 1, 1};
  auto out = conv2d_forward(in, w, b, a);
  auto g_out = random_tensor<double>({out.dim(0), out.dim(1), out.dim(2), out.dim(3)}, rng);
  Tensor<double> gi, gw, gb;
  conv2d_backward(in, w, g_out, a, &gi, &gw, &gb);
  // brute-force: dL/dw[o,c,ky,kx] = sum over outputs of g_out * in at tap
  Tensor<double> gw_ref(w.shape());
  for (int o = 0; o < 3; ++o)
    for (int c = 0; c < 2; ++c)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          double acc = 0;
          for (int oy = 0; oy < out.dim(2); ++oy)
            for (int ox = 0; ox < out.dim(3); ++ox) {
              const int iy = oy * a.stride - a.pad + ky * a.dilation;
              const int ix = ox * a.stride - a.pad + kx * a.dilation;
              if (iy >= 0 && iy < 6 && ix >= 0 && ix < 6) acc += g_out.at(0, o, oy, ox) * in.at(0, c, iy, ix);
            }
          gw_ref.at(o, c, ky, kx) = acc;
        }
  CHECK(max_abs_diff(gw, gw_ref) < 1e-10);
}

TEST_CASE("fully connected identity and constant-bias cases") {
  Rng rng(5);
  auto in = random_tensor<double>({3, 4}, rng);
  Tensor<double> eye({4, 4});
  for (int i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
  Tensor<double> b0({4});
  CHECK(max_abs_diff(fc_forward(in, eye, b0), in) == 0.0);

  Tensor<double> zw({4, 2});
  Tensor<double> b({2});
  b[0] = 3.5;
  b[1] = -1.25;
  auto out = fc_forward(in, zw, b);
  for (int i = 0; i < 3; ++i) {
    CHECK(out.at(i, 0) == 3.5);
    CHECK(out.at(i, 1) == -1.25);
  }
}

TEST_CASE("fully connected matches dot-product oracle") {
  Rng rng(29);
  auto in = random_tensor<double>({4, 6}, rng);
  auto w = random_tensor<double>({6, 2}, rng);
  auto b = random_tensor<double>({2}, rng);
  CHECK(max_abs_diff(fc_forward(in, w, b), oracle::matmul(in, w, b)) < 1e-12);
  Tensor<double> bad({5, 2});
  CHECK_THROWS_AS(fc_forward(in, bad, b), std::invalid_argument);
}

TEST_CASE("relu basic semantics") {
  Tensor<double> in({1, 3}, {-1.0, 0.0, 2.0});
  auto out = relu_forward(in);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 2.0);

  Tensor<double> pos({1, 3}, {0.5, 1.0, 7.0});
  CHECK(max_abs_diff(relu_forward(pos), pos) == 0.0);

  Tensor<double> g({1, 3}, {1.0, 1.0, 1.0});
  auto gi = relu_backward(in, g);
  CHECK(gi[0] == 0.0);
  CHECK(gi[1] == 0.0);  // gradient masked at exact zero as well
  CHECK(gi[2] == 1.0);
}

TEST_CASE("lrn single channel with alpha=0 divides by k^beta") {
  LrnAttrs a;
  a.alpha = 0.0;
  Rng rng(31);
  auto in = random_tensor<double>({1, 1, 4, 4}, rng);
  auto out = lrn_forward(in, a);
  const double denom = std::pow(a.k, a.beta);
  for (int64_t i = 0; i < in.size(); ++i) CHECK(out[i] == doctest::Approx(in[i] / denom).epsilon(1e-12));
}

TEST_CASE("lrn zero input stays zero and matches formula oracle on random input") {
  LrnAttrs a;
  Tensor<double> z({1, 8, 2, 2});
  auto out = lrn_forward(z, a);
  for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);

  Rng rng(37);
  auto in = random_tensor<double>({1, 8, 2, 2}, rng);
  CHECK(max_abs_diff(lrn_forward(in, a), oracle::lrn(in, a)) < 1e-10);
}

TEST_CASE("maxpool trivial and oracle cases") {
  Tensor<double> c({1, 1, 4, 4});
  c.fill(2.5);
  auto out = maxpool_forward(c, PoolAttrs{2, 2});
  for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == 2.5);

  Tensor<double> in({1, 1, 2, 2}, {1, 2, 3, 4});
  auto m = maxpool_forward(in, PoolAttrs{2, 2});
  CHECK(m.size() == 1);
  CHECK(m[0] == 4.0);

  Rng rng(41);
  auto r = random_tensor<double>({2, 3, 7, 7}, rng);
  CHECK(max_abs_diff(maxpool_forward(r, PoolAttrs{3, 2}), oracle::maxpool(r, 3, 2)) == 0.0);

  CHECK_THROWS_AS(maxpool_forward(in, PoolAttrs{5, 2}), std::invalid_argument);
}

TEST_CASE("maxpool backward routes gradient only to argmax and preserves totals") {
  Rng rng(43);
  auto in = random_tensor<double>({1, 2, 6, 6}, rng);
  MaxPoolCache cache;
  auto out = maxpool_forward(in, PoolAttrs{2, 2}, &cache);
  auto g_out = random_tensor<double>({1, 2, out.dim(2), out.dim(3)}, rng, 0.1, 1.0);
  auto g_in = maxpool_backward(cache, g_out);
  double sum_in = 0, sum_out = 0;
  int nonzero = 0;
  for (int64_t i = 0; i < g_in.size(); ++i) {
    sum_in += g_in[i];
    if (g_in[i] != 0) ++nonzero;
  }
  for (int64_t i = 0; i < g_out.size(); ++i) sum_out += g_out[i];
  CHECK(sum_in == doctest::Approx(sum_out).epsilon(1e-12));
  CHECK(nonzero <= g_out.size());
}

TEST_CASE("maxpool ties break to the first row-major element") {
  Tensor<double> in({1, 1, 2, 2}, {5, 5, 5, 5});
  MaxPoolCache cache;
  maxpool_forward(in, PoolAttrs{2, 2}, &cache);
  CHECK(cache.argmax[0] == 0);
}

TEST_CASE("softmax2 rows sum to one and resist overflow") {
  Tensor<double> s({2, 2}, {0, 0, 1000, 0});
  auto p = softmax2_forward(s);
  CHECK(p.at(0, 0) == doctest::Approx(0.5));
  CHECK(p.at(0, 1) == doctest::Approx(0.5));
  CHECK(p.at(1, 0) == doctest::Approx(1.0));
  CHECK(p.at(1, 1) == doctest::Approx(0.0));

  Rng rng(47);
  auto logits = random_tensor<double>({64, 2}, rng, -15, 15);
  auto probs = softmax2_forward(logits);
  for (int i = 0; i < 64; ++i) {
    const double sum = probs.at(i, 0) + probs.at(i, 1);
    CHECK(std::fabs(sum - 1.0) < 1e-12);
    CHECK(probs.at(i, 0) > 0.0);
    CHECK(probs.at(i, 1) < 1.0);
  }
}

TEST_CASE("sgd step semantics") {
  ParamBlock<double> p({2, 2});
  p.value.fill(1.0);
  std::vector<ParamBlock<double>*> params{&p};

  SUBCASE("zero gradient and zero decay leave parameters untouched") {
    sgd_step(params, 0.5, 0.0);
    for (int64_t i = 0; i < p.value.size(); ++i) CHECK(p.value[i] == 1.0);
  }

  SUBCASE("lr 1 and no decay subtracts the gradient exactly") {
    p.grad.fill(0.25);
    sgd_step(params, 1.0, 0.0);
    for (int64_t i = 0; i < p.value.size(); ++i) CHECK(p.value[i] == 0.75);
    for (int64_t i = 0; i < p.grad.size(); ++i) CHECK(p.grad[i] == 0.0);
  }

  SUBCASE("descent on a quadratic bowl shrinks the norm monotonically") {
    Rng rng(53);
    for (int64_t i = 0; i < p.value.size(); ++i) p.value[i] = rng.uniform(-2, 2);
    double prev = 1e300;
    for (int step = 0; step < 100; ++step) {
      // f(w) = ||w||^2, grad = 2w
      for (int64_t i = 0; i < p.value.size(); ++i) p.grad[i] = 2.0 * p.value[i];
      sgd_step(params, 0.1, 0.0);
      double norm = 0;
      for (int64_t i = 0; i < p.value.size(); ++i) norm += p.value[i] * p.value[i];
      CHECK(norm < prev);
      prev = norm;
    }
    CHECK(prev < 1e-6);
  }

  SUBCASE("weight decay honors the per-block flag") {
    ParamBlock<double> q({1});
    q.value[0] = 1.0;
    q.weight_decay_enabled = false;
    std::vector<ParamBlock<double>*> ps{&q};
    sgd_step(ps, 1.0, 0.1);
    CHECK(q.value[0] == 1.0);
    q.weight_decay_enabled = true;
    sgd_step(ps, 1.0, 0.1);
    CHECK(q.value[0] == doctest::Approx(0.9));
  }
}

TEST_CASE("ic layer identity at inference with unit running stats") {
  IcState<double> st(3);
  IcAttrs a;
  a.eps = 0.0;  // exact identity; the default eps perturbs by ~eps/2
  Rng rng(59);
  auto in = random_tensor<double>({2, 3, 4, 4}, rng);
  auto out = ic_forward(in, st, a, false, nullptr, nullptr);
  CHECK(max_abs_diff(out, in) == 0.0);
}

TEST_CASE("ic layer training normalizes per channel") {
  IcState<double> st(3);
  st.gamma.value.fill(2.0);
  st.shift.value.fill(0.5);
  IcAttrs a;
  a.dropout_rate = 0.0;
  Rng rng(61);
  auto in = random_tensor<double>({4, 3, 5, 5}, rng, -3, 5);
  auto out = ic_forward(in, st, a, true, &rng, nullptr);
  for (int c = 0; c < 3; ++c) {
    double mean = 0, var = 0;
    const int64_t m = 4 * 5 * 5;
    for (int s = 0; s < 4; ++s)
      for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) mean += out.at(s, c, y, x);
    mean /= m;
    for (int s = 0; s < 4; ++s)
      for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) var += (out.at(s, c, y, x) - mean) * (out.at(s, c, y, x) - mean);
    var /= m;
    CHECK(mean == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(std::sqrt(var) == doctest::Approx(2.0).epsilon(1e-4));
  }
  // running stats moved toward the batch statistics
  CHECK(st.running_mean[0] != 0.0);
}

TEST_CASE("ic layer requires batch statistics in training mode") {
  IcState<double> st(1);
  IcAttrs a;
  Tensor<double> single({1, 1, 1, 1});
  Rng rng(2);
  CHECK_THROWS_AS(ic_forward(single, st, a, true, &rng, nullptr),
                  std::invalid_argument);
}

TEST_CASE("dropout scales kept activations and masks gradient identically") {
  Rng rng(67);
  auto in = random_tensor<double>({100, 8}, rng, 0.5, 1.5);
  DropoutCache cache;
  auto out = dropout_forward(in, 0.5, true, &rng, &cache);
  int kept = 0;
  for (int64_t i = 0; i < out.size(); ++i) {
    if (out[i] != 0.0) {
      ++kept;
      CHECK(out[i] == doctest::Approx(in[i] * 2.0));
    }
  }
  CHECK(kept > 300);
  CHECK(kept < 500);
  auto g = dropout_backward(cache, in);
  for (int64_t i = 0; i < g.size(); ++i) CHECK(((g[i] == 0.0) == (out[i] == 0.0)));

  auto eval_out = dropout_forward(in, 0.5, false, nullptr, &cache);
  CHECK(max_abs_diff(eval_out, in) == 0.0);
}

TEST_CASE("roialign constant map gives constant output for any box") {
  Tensor<double> feats({1, 2, 9, 9});
  feats.fill(3.25);
  for (const BBox& box : {BBox{1, 1, 5, 5}, BBox{0.3f, 2.7f, 6.1f, 3.9f}, BBox{3, 3, 6, 6}}) {
    auto out = roialign_forward(feats, box, 1.0, 7);
    for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(3.25).epsilon(1e-12));
  }
}

TEST_CASE("roialign reproduces an integer-aligned crop exactly") {
  Rng rng(71);
  auto feats = random_tensor<double>({1, 3, 12, 12}, rng);
  BBox box{2, 3, 7, 7};
  auto out = roialign_forward(feats, box, 1.0, 7);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 7; ++j)
        CHECK(out[(int64_t(c) * 7 + i) * 7 + j] == doctest::Approx(feats.at(0, c, 3 + i, 2 + j)).epsilon(1e-12));
}

TEST_CASE("roialign matches bilinear oracle on random boxes") {
  Rng rng(73);
  auto feats = random_tensor<double>({1, 4, 10, 14}, rng);
  for (int t = 0; t < 50; ++t) {
    BBox box;
    box.x = float(rng.uniform(-3, 12));
    box.y = float(rng.uniform(-3, 9));
    box.w = float(rng.uniform(0.5, 14));
    box.h = float(rng.uniform(0.5, 11));
    const double scale = rng.uniform(0.2, 1.5);
    auto out = roialign_forward(feats, box, scale, 7);
    auto ref = oracle::roialign(feats, box, scale, 7);
    CHECK(max_abs_diff(out, ref) < 1e-8);
  }
}

TEST_CASE("roialign is affine in the features") {
  Rng rng(79);
  auto feats = random_tensor<double>({1, 2, 8, 8}, rng);
  BBox box{1.5, 2.0, 5.0, 4.0};  // fully inside so every sample point lands on the map
  auto base = roialign_forward(feats, box, 1.0, 7);
  Tensor<double> shifted = feats;
  for (int64_t i = 0; i < shifted.size(); ++i) shifted[i] += 2.5;
  auto out = roialign_forward(shifted, box, 1.0, 7);
  for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(base[i] + 2.5).epsilon(1e-9));
}

TEST_CASE("roialign box fully outside yields zeros") {
  Tensor<double> feats({1, 1, 6, 6});
  feats.fill(1.0);
  BBox box{100, 100, 5, 5};
  auto out = roialign_forward(feats, box, 1.0, 7);
  for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);
}
