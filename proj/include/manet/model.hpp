#pragma once

#include <string>
#include <vector>

#include "manet/adapters/backbone.hpp"
#include "manet/adapters/instance_adapter.hpp"

namespace manet {

enum class Modality { kRgb, kThermal };

enum class InitScheme {
  kFanIn,     // Gaussian with std sqrt(2/fan_in)
  kFixedStd,  // Gaussian with std 0.01 everywhere
};

// The full network: one shared generality adapter, one modality adapter per
// modality, and the instance adapter head.
template <typename T>
struct Model {
  GaWeights<T> ga;
  MaWeights<T> ma_rgb;
  MaWeights<T> ma_thermal;
  InstanceAdapter<T> ia;

  MaWeights<T>& ma(Modality m) { return m == Modality::kRgb ? ma_rgb : ma_thermal; }
  const MaWeights<T>& ma(Modality m) const { return m == Modality::kRgb ? ma_rgb : ma_thermal; }

  void init(Rng& rng, InitScheme scheme = InitScheme::kFanIn) {
    auto std_for = [&](const ParamBlock<T>& w) {
      if (scheme == InitScheme::kFixedStd) return 0.01;
      int64_t fan_in = w.value.size() / w.value.dim(0);
      if (w.value.ndim() == 2) fan_in = w.value.dim(0);  // fc weights are (in, out)
      return std::sqrt(2.0 / double(fan_in));
    };
    for (int l = 0; l < kBackboneLayers; ++l) {
      ga.conv[l].weight.init_gaussian(rng, std_for(ga.conv[l].weight));
      ma_rgb.conv[l].weight.init_gaussian(rng, std_for(ma_rgb.conv[l].weight));
      ma_thermal.conv[l].weight.init_gaussian(rng, std_for(ma_thermal.conv[l].weight));
    }
    for (ParamBlock<T>* w : {&ia.fc_r_w, &ia.fc_t_w, &ia.wp_r_w, &ia.wp_t_w, &ia.fusion_w})
      w->init_gaussian(rng, std_for(*w));
  }

  std::vector<NamedParam<T>> named_params() {
    std::vector<NamedParam<T>> out;
    auto add_backbone = [&](const std::string& prefix, GaWeights<T>* g, MaWeights<T>* m) {
      for (int l = 0; l < kBackboneLayers; ++l) {
        const std::string base = prefix + ".conv" + std::to_string(l + 1);
        if (g) {
          out.push_back({base + ".weight", &g->conv[l].weight});
          out.push_back({base + ".bias", &g->conv[l].bias});
        }
        if (m) {
          out.push_back({base + ".weight", &m->conv[l].weight});
          out.push_back({base + ".bias", &m->conv[l].bias});
          out.push_back({prefix + ".ic" + std::to_string(l + 1) + ".scale", &m->ic[l].gamma});
          out.push_back({prefix + ".ic" + std::to_string(l + 1) + ".shift", &m->ic[l].shift});
        }
      }
    };
    add_backbone("ga", &ga, nullptr);
    add_backbone("ma.rgb", nullptr, &ma_rgb);
    add_backbone("ma.thermal", nullptr, &ma_thermal);
    out.push_back({"ia.fc_r.weight", &ia.fc_r_w});
    out.push_back({"ia.fc_r.bias", &ia.fc_r_b});
    out.push_back({"ia.fc_t.weight", &ia.fc_t_w});
    out.push_back({"ia.fc_t.bias", &ia.fc_t_b});
    out.push_back({"ia.wp_r.weight", &ia.wp_r_w});
    out.push_back({"ia.wp_r.bias", &ia.wp_r_b});
    out.push_back({"ia.wp_t.weight", &ia.wp_t_w});
    out.push_back({"ia.wp_t.bias", &ia.wp_t_b});
    out.push_back({"ia.fusion.weight", &ia.fusion_w});
    out.push_back({"ia.fusion.bias", &ia.fusion_b});
    for (int k = 0; k < ia.branch_count(); ++k) {
      out.push_back({"ia.instance." + std::to_string(k) + ".weight", &ia.branches[k].w});
      out.push_back({"ia.instance." + std::to_string(k) + ".bias", &ia.branches[k].b});
    }
    return out;
  }

  std::vector<NamedBuffer<T>> named_buffers() {
    std::vector<NamedBuffer<T>> out;
    auto add = [&](const std::string& prefix, MaWeights<T>& m) {
      for (int l = 0; l < kBackboneLayers; ++l) {
        out.push_back({prefix + ".ic" + std::to_string(l + 1) + ".running_mean", &m.ic[l].running_mean});
        out.push_back({prefix + ".ic" + std::to_string(l + 1) + ".running_var", &m.ic[l].running_var});
      }
    };
    add("ma.rgb", ma_rgb);
    add("ma.thermal", ma_thermal);
    return out;
  }

  std::vector<ParamBlock<T>*> backbone_params() {
    std::vector<ParamBlock<T>*> out;
    for (auto& np : named_params())
      if (np.name.rfind("ga.", 0) == 0 || np.name.rfind("ma.", 0) == 0) out.push_back(np.param);
    return out;
  }

  std::vector<ParamBlock<T>*> ia_params(bool instance_branches_only = false) {
    std::vector<ParamBlock<T>*> out;
    for (auto& np : named_params()) {
      const bool is_branch = np.name.rfind("ia.instance.", 0) == 0;
      if (instance_branches_only ? is_branch : (np.name.rfind("ia.", 0) == 0 && !is_branch)) out.push_back(np.param);
    }
    return out;
  }

  std::vector<ParamBlock<T>*> all_params() {
    std::vector<ParamBlock<T>*> out;
    for (auto& np : named_params()) out.push_back(np.param);
    return out;
  }

  // FNV-1a over the raw bytes of every backbone parameter; used to assert the
  // backbone stays frozen during online updates.
  uint64_t backbone_checksum() {
    uint64_t h = 1469598103934665603ULL;
    auto mix = [&](const Tensor<T>& t) {
      const unsigned char* p = reinterpret_cast<const unsigned char*>(t.data());
      for (int64_t i = 0; i < t.size() * static_cast<int64_t>(sizeof(T)); ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
      }
    };
    for (ParamBlock<T>* p : backbone_params()) mix(p->value);
    return h;
  }
};

using ModelF = Model<float>;

}  // namespace manet
