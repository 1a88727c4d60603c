#include "manet/gradcheck_suite.hpp"

#include "manet/ops/conv2d.hpp"
#include "manet/ops/dropout.hpp"
#include "manet/ops/fully_connected.hpp"
#include "manet/ops/ic_layer.hpp"
#include "manet/ops/lrn.hpp"
#include "manet/ops/maxpool.hpp"

namespace manet {

using detail_gc::randn;
using detail_gc::weighted_sum;

namespace {

void check_conv2d(std::vector<OpCheck>& out, Rng& rng) {
  auto in = randn({2, 3, 8, 8}, rng, 1.0);
  auto w = randn({4, 3, 3, 3}, rng, 0.5);
  auto b = randn({4}, rng, 0.1);
  const ConvAttrs attrs{1, 2, 2};  // dilation included
  auto g = randn(conv2d_forward(in, w, b, attrs).shape(), rng, 1.0);
  auto fwd = [&] { return weighted_sum(conv2d_forward(in, w, b, attrs), g); };
  Tensor<double> gi, gw, gb;
  conv2d_backward(in, w, g, attrs, &gi, &gw, &gb);
  out.push_back({"conv2d/input", gradcheck(fwd, in, gi)});
  out.push_back({"conv2d/weight", gradcheck(fwd, w, gw)});
  out.push_back({"conv2d/bias", gradcheck(fwd, b, gb)});
}

void check_fc(std::vector<OpCheck>& out, Rng& rng) {
  auto in = randn({5, 7}, rng, 1.0);
  auto w = randn({7, 4}, rng, 0.5);
  auto b = randn({4}, rng, 0.1);
  auto g = randn({5, 4}, rng, 1.0);
  auto fwd = [&] { return weighted_sum(fc_forward(in, w, b), g); };
  Tensor<double> gi, gw, gb;
  fc_backward(in, w, g, &gi, &gw, &gb);
  out.push_back({"fully_connected/input", gradcheck(fwd, in, gi)});
  out.push_back({"fully_connected/weight", gradcheck(fwd, w, gw)});
  out.push_back({"fully_connected/bias", gradcheck(fwd, b, gb)});
}

void check_relu(std::vector<OpCheck>& out, Rng& rng, bool inject_error) {
  auto in = randn({4, 6}, rng, 1.0);
  auto g = randn({4, 6}, rng, 1.0);
  auto fwd = [&] { return weighted_sum(relu_forward(in), g); };
  Tensor<double> gi = relu_backward(in, g);
  if (inject_error)
    for (int64_t i = 0; i < gi.size(); ++i) gi[i] = -gi[i];  // deliberate sign corruption
  auto exclude = [&](int64_t i) { return std::fabs(in[i]) < 1e-3; };
  out.push_back({"relu", gradcheck(fwd, in, gi, exclude)});
}

void check_lrn(std::vector<OpCheck>& out, Rng& rng) {
  LrnAttrs attrs;
  auto in = randn({1, 8, 3, 3}, rng, 1.0);
  auto g = randn({1, 8, 3, 3}, rng, 1.0);
  auto fwd = [&] { return weighted_sum(lrn_forward(in, attrs), g); };
  Tensor<double> gi = lrn_backward(in, g, attrs);
  out.push_back({"lrn", gradcheck(fwd, in, gi)});
}

void check_ic(std::vector<OpCheck>& out, Rng& rng) {
  IcAttrs attrs;
  attrs.dropout_rate = 0.0;  // the Bernoulli mask is not a function of the input
  auto in = randn({3, 4, 5, 5}, rng, 1.0);
  auto g = randn({3, 4, 5, 5}, rng, 1.0);
  IcState<double> state(4);
  for (int c = 0; c < 4; ++c) {
    state.gamma.value[c] = 1.0 + 0.3 * rng.normal();
    state.shift.value[c] = 0.2 * rng.normal();
  }
  // training-mode forward mutates running stats; keep a pristine copy so
  // repeated FD evaluations see identical state
  auto fwd = [&] {
    IcState<double> st = state;
    return weighted_sum(ic_forward(in, st, attrs, true, nullptr, static_cast<IcCache<double>*>(nullptr)), g);
  };
  IcState<double> st = state;
  IcCache<double> cache;
  ic_forward(in, st, attrs, true, nullptr, &cache);
  Tensor<double> g_gamma, g_shift;
  Tensor<double> gi = ic_backward(cache, state, g, &g_gamma, &g_shift);
  out.push_back({"ic/input", gradcheck(fwd, in, gi)});
  out.push_back({"ic/scale", gradcheck(fwd, state.gamma.value, g_gamma)});
  out.push_back({"ic/shift", gradcheck(fwd, state.shift.value, g_shift)});

  // inference path uses running statistics
  IcState<double> infer_state(4);
  for (int c = 0; c < 4; ++c) {
    infer_state.running_mean[c] = 0.3 * rng.normal();
    infer_state.running_var[c] = 1.0 + 0.5 * rng.uniform();
    infer_state.gamma.value[c] = 1.0 + 0.3 * rng.normal();
  }
  auto fwd_infer = [&] {
    return weighted_sum(ic_forward(in, infer_state, attrs, false, nullptr, static_cast<IcCache<double>*>(nullptr)), g);
  };
  IcCache<double> icache;
  ic_forward(in, infer_state, attrs, false, nullptr, &icache);
  Tensor<double> gi2 = ic_backward(icache, infer_state, g, nullptr, nullptr);
  out.push_back({"ic/input_inference", gradcheck(fwd_infer, in, gi2)});
}

void check_maxpool(std::vector<OpCheck>& out, Rng& rng) {
  PoolAttrs attrs{3, 2};
  // widely separated values so +/- h never crosses an argmax boundary
  auto in = randn({2, 3, 7, 7}, rng, 10.0);
  MaxPoolCache cache;
  auto pooled = maxpool_forward(in, attrs, &cache);
  auto g = randn(pooled.shape(), rng, 1.0);
  auto fwd = [&] { return weighted_sum(maxpool_forward(in, attrs), g); };
  Tensor<double> gi = maxpool_backward(cache, g);
  out.push_back({"maxpool", gradcheck(fwd, in, gi)});
}

void check_roialign(std::vector<OpCheck>& out, Rng& rng) {
  auto feats = randn({1, 3, 8, 8}, rng, 1.0);
  const BBox box{1.3f, 2.1f, 4.7f, 3.9f};
  const double scale = 0.8;
  auto g = randn({3, 7, 7}, rng, 1.0);
  auto fwd = [&] { return weighted_sum(roialign_forward(feats, box, scale, 7), g); };
  Tensor<double> gi({1, 3, 8, 8});
  roialign_backward(g, box, scale, 7, gi);
  out.push_back({"roialign", gradcheck(fwd, feats, gi)});
}

void check_softmax(std::vector<OpCheck>& out, Rng& rng) {
  auto in = randn({6, 2}, rng, 1.5);
  auto g = randn({6, 2}, rng, 1.0);
  auto fwd = [&] { return weighted_sum(softmax2_forward(in), g); };
  Tensor<double> gi = softmax2_backward(softmax2_forward(in), g);
  out.push_back({"softmax2", gradcheck(fwd, in, gi)});
}

void check_instance_adapter(std::vector<OpCheck>& out, Rng& rng) {
  InstanceAdapter<double> ia;
  ia.dropout_rate = 0.0;  // keep the forward deterministic for FD
  ia.fc_r_w.init_gaussian(rng, 0.05);
  ia.fc_t_w.init_gaussian(rng, 0.05);
  ia.wp_r_w.init_gaussian(rng, 0.2);
  ia.wp_t_w.init_gaussian(rng, 0.2);
  ia.fusion_w.init_gaussian(rng, 0.05);
  ia.new_instance_head(rng, 0.1);
  ia.new_instance_head(rng, 0.1);

  const int n = 6;
  auto rgb = randn({n, InstanceAdapter<double>::kInputDim}, rng, 0.2);
  auto thermal = randn({n, InstanceAdapter<double>::kInputDim}, rng, 0.2);
  auto g_all = randn({n, 4}, rng, 1.0);
  auto g_rgb = randn({n, 2}, rng, 1.0);
  auto g_thermal = randn({n, 2}, rng, 1.0);

  auto fwd = [&] {
    IaOutput<double> o =
        instance_forward(ia, rgb, thermal, false, nullptr, static_cast<IaCache<double>*>(nullptr));
    return weighted_sum(o.scores_all, g_all) + weighted_sum(o.scores_rgb, g_rgb) +
           weighted_sum(o.scores_thermal, g_thermal);
  };

  for (auto* p : {&ia.fc_r_w, &ia.fc_t_w, &ia.wp_r_w, &ia.wp_t_w, &ia.fusion_w, &ia.branches[0].w, &ia.branches[1].w,
                  &ia.fc_r_b, &ia.wp_r_b, &ia.fusion_b})
    p->zero_grad();
  IaCache<double> cache;
  instance_forward(ia, rgb, thermal, false, nullptr, &cache);
  Tensor<double> g_pooled_rgb, g_pooled_thermal;
  instance_backward(ia, cache, g_all, g_rgb, g_thermal, &g_pooled_rgb, &g_pooled_thermal);

  // spot-check the big input gradients on a subset of coordinates, full
  // check on every parameter tensor that participates in the eta path
  out.push_back({"instance_adapter/pooled_rgb", gradcheck(fwd, rgb, g_pooled_rgb, nullptr, {}, 100)});
  out.push_back({"instance_adapter/pooled_thermal", gradcheck(fwd, thermal, g_pooled_thermal, nullptr, {}, 100)});
  out.push_back({"instance_adapter/wp_r_w", gradcheck(fwd, ia.wp_r_w.value, ia.wp_r_w.grad)});
  out.push_back({"instance_adapter/wp_t_w", gradcheck(fwd, ia.wp_t_w.value, ia.wp_t_w.grad)});
  out.push_back({"instance_adapter/fc_r_w", gradcheck(fwd, ia.fc_r_w.value, ia.fc_r_w.grad, nullptr, {}, 120)});
  out.push_back({"instance_adapter/fc_r_b", gradcheck(fwd, ia.fc_r_b.value, ia.fc_r_b.grad, nullptr, {}, 32)});
  out.push_back({"instance_adapter/fusion_w", gradcheck(fwd, ia.fusion_w.value, ia.fusion_w.grad, nullptr, {}, 120)});
  out.push_back({"instance_adapter/branch_w", gradcheck(fwd, ia.branches[0].w.value, ia.branches[0].w.grad, nullptr,
                                                        {}, 96)});
}

void check_backbone(std::vector<OpCheck>& out, Rng& rng) {
  GaWeights<double> ga;
  MaWeights<double> ma;
  ma.ic_attrs.dropout_rate = 0.0;
  for (int l = 0; l < kBackboneLayers; ++l) {
    ga.conv[l].weight.init_gaussian(rng, std::sqrt(2.0 / (ga.conv[l].weight.value.size() / ga.conv[l].weight.value.dim(0))));
    ma.conv[l].weight.init_gaussian(rng, std::sqrt(2.0 / (ma.conv[l].weight.value.size() / ma.conv[l].weight.value.dim(0))));
  }
  auto img = randn({2, 3, kMinBackboneInput, kMinBackboneInput}, rng, 0.3);

  auto fwd = [&] {
    GaWeights<double> ga_copy = ga;  // IC running stats mutate in training mode
    MaWeights<double> ma_copy = ma;
    auto fused = backbone_forward(img, ga_copy, ma_copy, true, nullptr, static_cast<BackboneCache<double>*>(nullptr));
    double acc = 0;
    for (int64_t i = 0; i < fused.size(); ++i) acc += fused[i] * ((i % 7) - 3.0);
    return acc;
  };

  GaWeights<double>& ga_ref = ga;
  MaWeights<double>& ma_ref = ma;
  BackboneCache<double> cache;
  auto fused = backbone_forward(img, ga_ref, ma_ref, true, nullptr, &cache);
  Tensor<double> g(fused.shape());
  for (int64_t i = 0; i < g.size(); ++i) g[i] = (i % 7) - 3.0;
  for (int l = 0; l < kBackboneLayers; ++l) {
    ga.conv[l].weight.zero_grad();
    ga.conv[l].bias.zero_grad();
    ma.conv[l].weight.zero_grad();
    ma.conv[l].bias.zero_grad();
    ma.ic[l].gamma.zero_grad();
    ma.ic[l].shift.zero_grad();
  }
  backbone_backward(ga_ref, ma_ref, cache, g, nullptr, nullptr);

  // a composite net crosses ReLU/pool kinks under almost any weight
  // perturbation; the step-halving filter drops those coordinates
  GradCheckOptions opts;
  opts.kink_filter = true;
  out.push_back({"backbone/ga_conv3_w", gradcheck(fwd, ga.conv[2].weight.value, ga.conv[2].weight.grad, nullptr, opts, 24)});
  out.push_back({"backbone/ga_conv1_w", gradcheck(fwd, ga.conv[0].weight.value, ga.conv[0].weight.grad, nullptr, opts, 24)});
  out.push_back({"backbone/ma_conv1_w", gradcheck(fwd, ma.conv[0].weight.value, ma.conv[0].weight.grad, nullptr, opts, 24)});
  out.push_back({"backbone/ma_ic2_scale", gradcheck(fwd, ma.ic[1].gamma.value, ma.ic[1].gamma.grad, nullptr, opts, 24)});
  out.push_back({"backbone/ga_bias2", gradcheck(fwd, ga.conv[1].bias.value, ga.conv[1].bias.grad, nullptr, opts, 16)});
}

void check_losses(std::vector<OpCheck>& out, Rng& rng) {
  KernelFamily family = KernelFamily::make_default();

  {  // unbiased two-sample estimate
    auto x = randn({6, 5}, rng, 0.8);
    auto y = randn({6, 5}, rng, 0.8);
    auto fwd = [&] { return double(mkmmd_unbiased(x, y, family)); };
    Tensor<double> gx, gy;
    mkmmd_unbiased_backward(x, y, family, 1.0, gx, gy);
    out.push_back({"mkmmd/x", gradcheck(fwd, x, gx)});
    out.push_back({"mkmmd/y", gradcheck(fwd, y, gy)});
  }

  {  // hierarchical divergence through all six feature sets
    std::array<LayerPair<double>, 3> ga, ma;
    for (int l = 0; l < 3; ++l) {
      ga[l].rgb = randn({4, 3}, rng, 0.7);
      ga[l].thermal = randn({4, 3}, rng, 0.7);
      ma[l].rgb = randn({4, 3}, rng, 0.7);
      ma[l].thermal = randn({4, 3}, rng, 0.7);
    }
    auto fwd = [&] { return double(hd_loss(ga, ma, family).loss); };
    std::array<LayerPair<double>, 3> g_ga, g_ma;
    hd_loss_backward(ga, ma, family, 1.0, g_ga, g_ma);
    out.push_back({"hd_loss/ga1_rgb", gradcheck(fwd, ga[0].rgb, g_ga[0].rgb)});
    out.push_back({"hd_loss/ma2_thermal", gradcheck(fwd, ma[1].thermal, g_ma[1].thermal)});
    out.push_back({"hd_loss/ga3_thermal", gradcheck(fwd, ga[2].thermal, g_ga[2].thermal)});
  }

  {  // classification losses
    auto logits = randn({8, 2}, rng, 1.0);
    std::vector<int> labels;
    for (int i = 0; i < 8; ++i) labels.push_back(i % 3 == 0 ? 1 : 0);
    auto fwd = [&] { return double(bce_loss(logits, labels)); };
    Tensor<double> gl = bce_loss_backward(logits, labels);
    out.push_back({"bce_loss", gradcheck(fwd, logits, gl)});

    auto s_r = randn({8, 2}, rng, 1.0);
    auto s_t = randn({8, 2}, rng, 1.0);
    LossConfig cfg = LossConfig::offline();
    auto fwd_cls = [&] { return double(cls_loss(logits, s_r, s_t, labels, cfg)); };
    Tensor<double> g_fus = bce_loss_backward(logits, labels);
    Tensor<double> g_r = bce_loss_backward(s_r, labels, cfg.lambda1);
    Tensor<double> g_t = bce_loss_backward(s_t, labels, cfg.lambda2);
    out.push_back({"cls_loss/fusion", gradcheck(fwd_cls, logits, g_fus)});
    out.push_back({"cls_loss/rgb", gradcheck(fwd_cls, s_r, g_r)});
    out.push_back({"cls_loss/thermal", gradcheck(fwd_cls, s_t, g_t)});
  }

  {  // cross-domain embedding
    auto scores = randn({5, 4}, rng, 1.0);
    auto fwd = [&] { return double(instance_embedding_loss(scores, 2)); };
    Tensor<double> gs = instance_embedding_loss_backward(scores, 2);
    out.push_back({"instance_embedding_loss", gradcheck(fwd, scores, gs)});
  }

  {  // combined objective at a schedule boundary value
    auto logits = randn({6, 2}, rng, 1.0);
    auto s_r = randn({6, 2}, rng, 1.0);
    auto s_t = randn({6, 2}, rng, 1.0);
    auto emb = randn({3, 4}, rng, 1.0);
    auto x = randn({4, 3}, rng, 0.7);
    auto y = randn({4, 3}, rng, 0.7);
    std::vector<int> labels{1, 0, 0, 1, 0, 0};
    LossConfig cfg = LossConfig::offline();
    const int64_t iter = 300;  // nu2 = 0.1
    auto fwd = [&] {
      const double cls = cls_loss(logits, s_r, s_t, labels, cfg);
      const double inst = instance_embedding_loss(emb, 1);
      const double hd = mkmmd_unbiased(x, y, KernelFamily::make_default());
      return double(total_loss(cls, inst, hd, cfg, iter));
    };
    Tensor<double> g_fus = bce_loss_backward(logits, labels);
    Tensor<double> g_emb = instance_embedding_loss_backward(emb, 1, cfg.nu1);
    Tensor<double> gx, gy;
    mkmmd_unbiased_backward(x, y, KernelFamily::make_default(), nu2_schedule(iter), gx, gy);
    out.push_back({"total_loss/cls_path", gradcheck(fwd, logits, g_fus)});
    out.push_back({"total_loss/inst_path", gradcheck(fwd, emb, g_emb)});
    out.push_back({"total_loss/hd_path", gradcheck(fwd, x, gx)});
  }
}

}  // namespace

std::vector<OpCheck> run_gradcheck_suite(uint64_t seed, bool inject_error) {
  Rng rng(seed);
  std::vector<OpCheck> out;
  check_conv2d(out, rng);
  check_fc(out, rng);
  check_relu(out, rng, inject_error);
  check_lrn(out, rng);
  check_ic(out, rng);
  check_maxpool(out, rng);
  check_roialign(out, rng);
  check_softmax(out, rng);
  check_instance_adapter(out, rng);
  check_backbone(out, rng);
  check_losses(out, rng);
  return out;
}

}  // namespace manet
