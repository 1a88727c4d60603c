#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "manet/model.hpp"
#include "manet/tensor.hpp"

namespace manet {

// Checkpoint container: magic "MANETPP1", a manifest of (name, dtype, shape,
// payload offset/size), then raw little-endian tensor payloads. Round trips
// are bit-exact.

struct CheckpointEntry {
  std::string name;
  uint8_t dtype = 0;  // 0 = float32, 1 = float64
  std::vector<int> shape;
  std::vector<char> bytes;
};

void write_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint(const std::string& path);

// Serializes parameters plus IC running statistics. Instance branch count is
// recovered from the manifest names on load.
std::vector<CheckpointEntry> model_to_entries(Model<float>& model);
void save_model(const std::string& path, Model<float>& model);
void load_model(const std::string& path, Model<float>& model);

// In-memory serialized form, for reproducibility checks.
std::vector<char> checkpoint_bytes(const std::vector<CheckpointEntry>& entries);

}  // namespace manet
