#include "manet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "manet/rng.hpp"

namespace fs = std::filesystem;

namespace manet {

namespace {

uint8_t clamp8(double v) { return static_cast<uint8_t>(std::min(255.0, std::max(0.0, v))); }

struct TargetAppearance {
  double rgb_base[3];
  double rgb_alt[3];
  double thermal_base;
  double stripe_period;
};

bool event_active(const SynthConfig& cfg, int frame, EventKind kind, const EventWindow** win = nullptr) {
  for (const auto& e : cfg.events) {
    if (e.kind == kind && frame >= e.begin && frame < e.end) {
      if (win) *win = &e;
      return true;
    }
  }
  return false;
}

}  // namespace

SequencePair generate_sequence(const SynthConfig& cfg) {
  check(cfg.width >= 32 && cfg.height >= 32 && cfg.frames >= 1, "synth: degenerate config");
  Rng rng(cfg.seed);
  SequencePair seq;
  seq.width = cfg.width;
  seq.height = cfg.height;

  // background: two low-frequency waves per channel plus per-pixel noise
  double bg_phase[3], bg_freq[3], bg_level[3];
  for (int c = 0; c < 3; ++c) {
    bg_phase[c] = rng.uniform(0, 6.28318);
    bg_freq[c] = rng.uniform(0.03, 0.09);
    bg_level[c] = rng.uniform(70, 130);
  }
  const double bg_thermal_level = rng.uniform(60, 110);
  const double bg_thermal_freq = rng.uniform(0.02, 0.06);

  TargetAppearance ap;
  for (int c = 0; c < 3; ++c) {
    ap.rgb_base[c] = rng.uniform(150, 235);
    ap.rgb_alt[c] = rng.uniform(20, 90);
  }
  ap.thermal_base = rng.uniform(180, 235);  // target runs hot by default
  ap.stripe_period = rng.uniform(5, 9);

  double tw = rng.uniform(cfg.min_target, cfg.max_target);
  double th = rng.uniform(cfg.min_target, cfg.max_target);
  double cx = rng.uniform(tw / 2 + 2, cfg.width - tw / 2 - 2);
  double cy = rng.uniform(th / 2 + 2, cfg.height - th / 2 - 2);
  double angle = rng.uniform(0, 6.28318);
  double vx = cfg.speed * std::cos(angle);
  double vy = cfg.speed * std::sin(angle);

  for (int f = 0; f < cfg.frames; ++f) {
    SynthFrame frame;
    frame.rgb = ImageU8(3, cfg.height, cfg.width);
    frame.thermal = ImageU8(1, cfg.height, cfg.width);

    const bool flare = event_active(cfg, f, EventKind::kIlluminationFlare);
    const bool crossover = event_active(cfg, f, EventKind::kThermalCrossover);
    const bool occlusion = event_active(cfg, f, EventKind::kPartialOcclusion);

    const double rx = tw / 2, ry = th / 2;
    const double thermal_target = crossover ? bg_thermal_level : ap.thermal_base;

    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        const bool inside = dx * dx + dy * dy <= 1.0;
        // RGB channels
        for (int c = 0; c < 3; ++c) {
          double v;
          if (inside) {
            const double stripe = std::sin((x + 2 * y) / ap.stripe_period);
            v = stripe > 0 ? ap.rgb_base[c] : ap.rgb_alt[c];
          } else {
            v = bg_level[c] + 40.0 * std::sin(bg_freq[c] * x + bg_phase[c]) * std::cos(bg_freq[c] * y - bg_phase[c]);
          }
          v += rng.normal() * cfg.rgb_noise;
          if (flare) v = 255.0 - (255.0 - v) * 0.25;  // strong washout
          frame.rgb.at(c, y, x) = clamp8(v);
        }
        // thermal channel
        double t;
        if (inside) {
          t = thermal_target;
        } else {
          t = bg_thermal_level + 10.0 * std::sin(bg_thermal_freq * (x + y));
        }
        t += rng.normal() * cfg.thermal_noise;
        frame.thermal.at(0, y, x) = clamp8(t);
      }
    }

    if (occlusion) {
      // vertical bar over the leading half of the target, both modalities
      const int bar_x0 = std::max(0, int(cx));
      const int bar_x1 = std::min(cfg.width, int(cx + rx + 2));
      for (int y = 0; y < cfg.height; ++y) {
        for (int x = bar_x0; x < bar_x1; ++x) {
          for (int c = 0; c < 3; ++c) frame.rgb.at(c, y, x) = clamp8(40 + 8 * rng.normal());
          frame.thermal.at(0, y, x) = clamp8(70 + 6 * rng.normal());
        }
      }
    }

    BBox gt;
    gt.x = float(cx - rx);
    gt.y = float(cy - ry);
    gt.w = float(tw);
    gt.h = float(th);
    frame.gt = clamp_to_frame(gt, cfg.width, cfg.height, 8.0f);
    seq.frames.push_back(std::move(frame));

    // advance motion; bounce off walls so the target stays in frame
    cx += vx + rng.normal() * cfg.jitter;
    cy += vy + rng.normal() * cfg.jitter;
    if (cx - rx < 1 || cx + rx > cfg.width - 1) {
      vx = -vx;
      cx = std::min(std::max(cx, rx + 1), cfg.width - rx - 1);
    }
    if (cy - ry < 1 || cy + ry > cfg.height - 1) {
      vy = -vy;
      cy = std::min(std::max(cy, ry + 1), cfg.height - ry - 1);
    }
  }
  return seq;
}

void write_pnm(const ImageU8& img, const std::string& path) {
  check(img.channels == 1 || img.channels == 3, "write_pnm: needs 1 or 3 channels");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_pnm: cannot open " + path);
  f << (img.channels == 3 ? "P6" : "P5") << "\n" << img.width << " " << img.height << "\n255\n";
  if (img.channels == 1) {
    f.write(reinterpret_cast<const char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
  } else {
    std::vector<uint8_t> row(size_t(img.width) * 3);  // interleave
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < 3; ++c) row[size_t(x) * 3 + c] = img.at(c, y, x);
      f.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
    }
  }
  if (!f) throw std::runtime_error("write_pnm: write failed for " + path);
}

namespace {

void skip_pnm_space(std::istream& in) {
  int c = in.peek();
  while (c == '#' || std::isspace(c)) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      in.get();
    }
    c = in.peek();
  }
}

int read_pnm_int(std::istream& in, const std::string& path) {
  skip_pnm_space(in);
  int v = -1;
  in >> v;
  if (!in || v < 0) throw std::runtime_error("read_pnm: malformed header in " + path);
  return v;
}

}  // namespace

ImageU8 read_pnm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_pnm: cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6" && magic != "P5") throw std::runtime_error("read_pnm: unsupported magic '" + magic + "' in " + path);
  const int channels = magic == "P6" ? 3 : 1;
  const int w = read_pnm_int(f, path);
  const int h = read_pnm_int(f, path);
  const int maxval = read_pnm_int(f, path);
  if (maxval != 255)
    throw std::runtime_error("read_pnm: maxval " + std::to_string(maxval) + " rejected (need 255) in " + path);
  f.get();  // single whitespace after maxval
  ImageU8 img(channels, h, w);
  if (channels == 1) {
    f.read(reinterpret_cast<char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
  } else {
    std::vector<uint8_t> row(size_t(w) * 3);
    for (int y = 0; y < h; ++y) {
      f.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size()));
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = row[size_t(x) * 3 + c];
    }
  }
  if (!f)
    throw std::runtime_error("read_pnm: truncated payload in " + path + " at byte offset " +
                             std::to_string(f.tellg() == -1 ? -1 : long(f.tellg())));
  return img;
}

void write_sequence(const SequencePair& seq, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "visible");
  fs::create_directories(fs::path(dir) / "infrared");
  std::ofstream gt(fs::path(dir) / "groundtruth.txt");
  if (!gt) throw std::runtime_error("write_sequence: cannot open groundtruth file in " + dir);
  char name[32];
  for (int i = 0; i < seq.size(); ++i) {
    std::snprintf(name, sizeof(name), "%06d.ppm", i);
    write_pnm(seq.frames[i].rgb, (fs::path(dir) / "visible" / name).string());
    std::snprintf(name, sizeof(name), "%06d.pgm", i);
    write_pnm(seq.frames[i].thermal, (fs::path(dir) / "infrared" / name).string());
    const BBox& b = seq.frames[i].gt;
    gt << b.x << "," << b.y << "," << b.w << "," << b.h << "\n";
  }
}

SequencePair read_sequence(const std::string& dir) {
  std::ifstream gt(fs::path(dir) / "groundtruth.txt");
  if (!gt) throw std::runtime_error("read_sequence: missing groundtruth.txt in " + dir);
  SequencePair seq;
  std::string line;
  char name[32];
  int i = 0;
  while (std::getline(gt, line)) {
    if (line.empty()) continue;
    SynthFrame frame;
    float x, y, w, h;
    if (std::sscanf(line.c_str(), "%f,%f,%f,%f", &x, &y, &w, &h) != 4)
      throw std::runtime_error("read_sequence: malformed groundtruth line " + std::to_string(i + 1) + " in " + dir);
    frame.gt = BBox{x, y, w, h};
    std::snprintf(name, sizeof(name), "%06d.ppm", i);
    frame.rgb = read_pnm((fs::path(dir) / "visible" / name).string());
    std::snprintf(name, sizeof(name), "%06d.pgm", i);
    frame.thermal = read_pnm((fs::path(dir) / "infrared" / name).string());
    seq.frames.push_back(std::move(frame));
    ++i;
  }
  check(!seq.frames.empty(), "read_sequence: no frames in " + dir);
  seq.width = seq.frames[0].rgb.width;
  seq.height = seq.frames[0].rgb.height;
  // every frame listed in groundtruth must have both images; missing files
  // already threw above. Extra images on disk are ignored.
  char probe[32];
  std::snprintf(probe, sizeof(probe), "%06d.ppm", i);
  if (fs::exists(fs::path(dir) / "visible" / probe))
    throw std::runtime_error("read_sequence: groundtruth.txt in " + dir + " ends at frame " + std::to_string(i - 1) +
                             " but more images exist (missing gt line for frame " + std::to_string(i) + ")");
  return seq;
}

Tensor<float> to_input_tensor(const ImageU8& img, int out_h, int out_w) {
  check(img.channels == 1 || img.channels == 3, "to_input_tensor: needs 1 or 3 channels");
  if (out_h <= 0) out_h = img.height;
  if (out_w <= 0) out_w = img.width;
  Tensor<float> t({1, 3, out_h, out_w});
  const double sy = double(img.height) / out_h;
  const double sx = double(img.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    // half-pixel centers keep resizing symmetric
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::min(std::max(fy, 0.0), double(img.height - 1));
    const int y0 = int(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double ly = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::min(std::max(fx, 0.0), double(img.width - 1));
      const int x0 = int(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double lx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const int sc = img.channels == 3 ? c : 0;
        const double v = (1 - ly) * ((1 - lx) * img.at(sc, y0, x0) + lx * img.at(sc, y0, x1)) +
                         ly * ((1 - lx) * img.at(sc, y1, x0) + lx * img.at(sc, y1, x1));
        t.at(0, c, y, x) = float(v / 255.0 - 0.5);
      }
    }
  }
  return t;
}

}  // namespace manet
