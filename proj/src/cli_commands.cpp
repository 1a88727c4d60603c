#include "manet/cli_commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "manet/checkpoint.hpp"
#include "manet/eval.hpp"
#include "manet/gradcheck_suite.hpp"
#include "manet/tracker.hpp"
#include "manet/trainer.hpp"

namespace fs = std::filesystem;

namespace manet::cli {

namespace {

std::vector<std::string> sequence_dirs(const std::string& root) {
  std::vector<std::string> dirs;
  if (fs::exists(fs::path(root) / "groundtruth.txt")) {
    dirs.push_back(root);  // a single sequence
    return dirs;
  }
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "groundtruth.txt")) dirs.push_back(entry.path().string());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw std::runtime_error("no sequences found under " + root);
  return dirs;
}

void draw_box(ImageU8& img, const BBox& b, uint8_t r, uint8_t g, uint8_t bl) {
  const int x0 = std::max(0, int(b.x)), y0 = std::max(0, int(b.y));
  const int x1 = std::min(img.width - 1, int(b.x + b.w)), y1 = std::min(img.height - 1, int(b.y + b.h));
  auto put = [&](int y, int x) {
    img.at(0, y, x) = r;
    img.at(1, y, x) = g;
    img.at(2, y, x) = bl;
  };
  for (int x = x0; x <= x1; ++x) {
    put(y0, x);
    put(y1, x);
  }
  for (int y = y0; y <= y1; ++y) {
    put(y, x0);
    put(y, x1);
  }
}

std::vector<EventWindow> default_test_events(int frames) {
  // one illumination flare and one thermal crossover per held-out sequence
  std::vector<EventWindow> ev;
  ev.push_back({frames / 5, frames / 5 + frames / 6, EventKind::kIlluminationFlare});
  ev.push_back({frames / 2, frames / 2 + frames / 5, EventKind::kThermalCrossover});
  return ev;
}

}  // namespace

int cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
  char name[32];
  for (int i = 0; i < cfg.synth_train_seqs; ++i) {
    SynthConfig sc;
    sc.width = cfg.synth_width;
    sc.height = cfg.synth_height;
    sc.frames = cfg.synth_frames;
    sc.seed = cfg.seed * 1000 + i;
    SequencePair seq = generate_sequence(sc);
    std::snprintf(name, sizeof(name), "seq_%02d", i);
    write_sequence(seq, (fs::path(out_dir) / "train" / name).string());
  }
  for (int i = 0; i < cfg.synth_test_seqs; ++i) {
    SynthConfig sc;
    sc.width = cfg.synth_width;
    sc.height = cfg.synth_height;
    sc.frames = cfg.synth_frames;
    sc.seed = cfg.seed * 1000 + 500 + i;
    sc.events = default_test_events(sc.frames);
    SequencePair seq = generate_sequence(sc);
    std::snprintf(name, sizeof(name), "seq_%02d", i);
    write_sequence(seq, (fs::path(out_dir) / "test" / name).string());
  }
  std::cout << "wrote " << cfg.synth_train_seqs << " training and " << cfg.synth_test_seqs
            << " held-out sequences under " << out_dir << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir) {
  std::vector<SequencePair> sequences;
  for (const std::string& dir : sequence_dirs(data_dir)) sequences.push_back(read_sequence(dir));
  std::cout << "training on " << sequences.size() << " sequences, " << cfg.offline_iters << " iterations\n";

  Model<float> model;
  Rng rng(cfg.seed);
  model.init(rng, cfg.init_scheme == "fixed_std" ? InitScheme::kFixedStd : InitScheme::kFanIn);
  for (size_t k = 0; k < sequences.size(); ++k) model.ia.new_instance_head(rng, 0.01);

  std::ofstream log(fs::path(out_dir) / "train_log.csv");
  OfflineTrainer trainer(model, sequences, cfg, nullptr);
  trainer.run(cfg.offline_iters, &log);

  const std::string ckpt = (fs::path(out_dir) / "model.ckpt").string();
  save_model(ckpt, model);
  std::cout << "checkpoint written to " << ckpt << "\n";
  return 0;
}

int cmd_track(const RunConfig& cfg, const std::string& seq_dir, const std::string& checkpoint,
              const std::string& out_dir, bool overlay) {
  SequencePair seq = read_sequence(sequence_dirs(seq_dir)[0]);
  Model<float> model;
  load_model(checkpoint, model);

  Tracker tracker(model, cfg, cfg.seed);
  tracker.init(seq.frames[0], seq.frames[0].gt);

  std::ofstream csv(fs::path(out_dir) / "trajectory.csv");
  csv << "frame_id,x,y,w,h,score\n";
  const BBox& b0 = seq.frames[0].gt;
  csv << 0 << "," << b0.x << "," << b0.y << "," << b0.w << "," << b0.h << "," << 1.0 << "\n";

  fs::path overlay_dir = fs::path(out_dir) / "overlay";
  if (overlay) fs::create_directories(overlay_dir);
  char name[32];
  if (overlay) {
    ImageU8 img = seq.frames[0].rgb;
    draw_box(img, seq.frames[0].gt, 0, 255, 0);
    std::snprintf(name, sizeof(name), "%06d.ppm", 0);
    write_pnm(img, (overlay_dir / name).string());
  }

  for (int f = 1; f < seq.size(); ++f) {
    Tracker::StepResult res = tracker.track(seq.frames[f]);
    tracker.maybe_update();
    csv << f << "," << res.box.x << "," << res.box.y << "," << res.box.w << "," << res.box.h << ","
        << res.positive_prob << "\n";
    if (overlay) {
      ImageU8 img = seq.frames[f].rgb;
      draw_box(img, seq.frames[f].gt, 0, 255, 0);
      draw_box(img, res.box, 255, 0, 0);
      std::snprintf(name, sizeof(name), "%06d.ppm", f);
      write_pnm(img, (overlay_dir / name).string());
    }
  }
  std::cout << "trajectory written to " << (fs::path(out_dir) / "trajectory.csv").string() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& seq_dir, const std::string& trajectory,
             const std::string& out_dir) {
  (void)cfg;
  SequencePair seq = read_sequence(sequence_dirs(seq_dir)[0]);
  std::vector<BBox> gts;
  for (const auto& f : seq.frames) gts.push_back(f.gt);

  std::ifstream csv(trajectory);
  if (!csv) throw std::runtime_error("cannot open trajectory " + trajectory);
  std::vector<BBox> results;
  std::string line;
  std::getline(csv, line);  // header
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    int id;
    BBox b;
    float score;
    if (std::sscanf(line.c_str(), "%d,%f,%f,%f,%f,%f", &id, &b.x, &b.y, &b.w, &b.h, &score) != 6)
      throw std::runtime_error("malformed trajectory line: " + line);
    results.push_back(b);
  }
  if (results.size() != gts.size())
    throw std::runtime_error("trajectory has " + std::to_string(results.size()) + " frames, ground truth has " +
                             std::to_string(gts.size()));

  MetricReport report = compute_metrics(results, gts);
  write_metric_report(report, out_dir);
  std::cout << "PR@5=" << report.pr_at_5 << " PR@20=" << report.pr_at_20 << " SR=" << report.sr_auc
            << " meanIoU=" << report.mean_iou << "\n";
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg, const std::string& out_dir, bool inject_error) {
  std::vector<OpCheck> checks = run_gradcheck_suite(cfg.seed, inject_error);
  std::ofstream report(fs::path(out_dir) / "gradcheck_report.txt");
  bool ok = true;
  for (const auto& c : checks) {
    const std::string line = (c.result.pass ? "[PASS] " : "[FAIL] ") + c.name + ": " + c.result.summary();
    std::cout << line << "\n";
    report << line << "\n";
    ok = ok && c.result.pass;
  }
  std::cout << (ok ? "all gradient checks passed" : "GRADIENT CHECK FAILURE") << "\n";
  return ok ? 0 : 1;
}

int cmd_dump_features(const RunConfig& cfg, const std::string& seq_dir, const std::string& checkpoint,
                      const std::string& out_dir) {
  (void)cfg;
  SequencePair seq = read_sequence(sequence_dirs(seq_dir)[0]);
  Model<float> model;
  load_model(checkpoint, model);

  fs::path feat_dir = fs::path(out_dir) / "features";
  fs::create_directories(feat_dir);

  for (Modality m : {Modality::kRgb, Modality::kThermal}) {
    const char* mod_name = m == Modality::kRgb ? "rgb" : "ir";
    Tensor<float> input = to_input_tensor(m == Modality::kRgb ? seq.frames[0].rgb : seq.frames[0].thermal);
    BackboneCache<float> cache;
    backbone_forward(input, model.ga, model.ma(m), false, nullptr, &cache);
    for (int l = 0; l < kBackboneLayers; ++l) {
      for (const char* source : {"ga", "ma"}) {
        const Tensor<float>& t = source[0] == 'g' ? cache.layer[l].ga_out : cache.layer[l].ma_out;
        const int c = t.dim(1), h = t.dim(2), w = t.dim(3);
        ImageU8 img(1, h, w);
        std::vector<double> mean(size_t(h) * w, 0.0);
        for (int ch = 0; ch < c; ++ch)
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) mean[size_t(y) * w + x] += t.at(0, ch, y, x);
        double lo = mean[0], hi = mean[0];
        for (double v : mean) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            img.at(0, y, x) = uint8_t(std::min(255.0, std::max(0.0, (mean[size_t(y) * w + x] - lo) * scale)));
        char name[64];
        std::snprintf(name, sizeof(name), "%s_%s_l%d.pgm", source, mod_name, l + 1);
        write_pnm(img, (feat_dir / name).string());
      }
    }
  }
  std::cout << "feature maps written to " << feat_dir.string() << "\n";
  return 0;
}

}  // namespace manet::cli
