#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "manet/bbox.hpp"
#include "manet/tensor.hpp"

namespace manet {

// Planar 8-bit image, CHW.
struct ImageU8 {
  int channels = 0, height = 0, width = 0;
  std::vector<uint8_t> pixels;

  ImageU8() = default;
  ImageU8(int c, int h, int w) : channels(c), height(h), width(w), pixels(size_t(c) * h * w, 0) {}
  uint8_t& at(int c, int y, int x) { return pixels[(size_t(c) * height + y) * width + x]; }
  uint8_t at(int c, int y, int x) const { return pixels[(size_t(c) * height + y) * width + x]; }
};

enum class EventKind { kIlluminationFlare, kThermalCrossover, kPartialOcclusion };

struct EventWindow {
  int begin = 0;  // inclusive frame index
  int end = 0;    // exclusive
  EventKind kind = EventKind::kIlluminationFlare;
};

struct SynthConfig {
  int width = 160;
  int height = 160;
  int frames = 60;
  double min_target = 24;
  double max_target = 40;
  double speed = 1.5;        // px per frame, constant-velocity base motion
  double jitter = 0.4;       // Gaussian motion jitter, px
  double rgb_noise = 6.0;    // additive pixel noise, 0..255 scale
  double thermal_noise = 4.0;
  std::vector<EventWindow> events;
  uint64_t seed = 1;
};

struct SynthFrame {
  ImageU8 rgb;      // 3 x H x W
  ImageU8 thermal;  // 1 x H x W
  BBox gt;
};

struct SequencePair {
  int width = 0, height = 0;
  std::vector<SynthFrame> frames;

  int size() const { return static_cast<int>(frames.size()); }
};

// Renders a textured elliptical target moving over a textured background with
// optional appearance events. Deterministic for a given config.
SequencePair generate_sequence(const SynthConfig& cfg);

// Directory layout: <dir>/visible/%06d.ppm, <dir>/infrared/%06d.pgm,
// <dir>/groundtruth.txt with one "x,y,w,h" line per frame.
void write_sequence(const SequencePair& seq, const std::string& dir);
SequencePair read_sequence(const std::string& dir);

// PPM (P6) / PGM (P5), binary, maxval 255.
void write_pnm(const ImageU8& img, const std::string& path);
ImageU8 read_pnm(const std::string& path);

// Normalized network input (1 x 3 x H x W) in [-0.5, 0.5]; single-channel
// images are replicated to three channels. Optionally resized bilinearly.
Tensor<float> to_input_tensor(const ImageU8& img, int out_h = 0, int out_w = 0);

}  // namespace manet
