#include "manet/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace manet {

namespace {

constexpr char kMagic[8] = {'M', 'A', 'N', 'E', 'T', 'P', 'P', '1'};

template <typename T>
void put(std::vector<char>& out, T v) {
  // host is little-endian on every supported target
  const char* p = reinterpret_cast<const char*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T take(const std::vector<char>& in, size_t& off, const std::string& what) {
  if (off + sizeof(T) > in.size()) throw std::runtime_error("checkpoint: truncated while reading " + what);
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

std::vector<char> checkpoint_bytes(const std::vector<CheckpointEntry>& entries) {
  std::vector<char> out(kMagic, kMagic + 8);
  put<uint32_t>(out, static_cast<uint32_t>(entries.size()));
  uint64_t offset = 0;
  for (const auto& e : entries) {
    put<uint16_t>(out, static_cast<uint16_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put<uint8_t>(out, e.dtype);
    put<uint8_t>(out, static_cast<uint8_t>(e.shape.size()));
    for (int d : e.shape) put<uint32_t>(out, static_cast<uint32_t>(d));
    put<uint64_t>(out, offset);
    put<uint64_t>(out, static_cast<uint64_t>(e.bytes.size()));
    offset += e.bytes.size();
  }
  put<uint64_t>(out, offset);
  for (const auto& e : entries) out.insert(out.end(), e.bytes.begin(), e.bytes.end());
  return out;
}

void write_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries) {
  const std::vector<char> bytes = checkpoint_bytes(entries);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  f.write(bytes.data(), std::streamsize(bytes.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::vector<CheckpointEntry> read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  std::vector<char> in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < 12 || std::memcmp(in.data(), kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  size_t off = 8;
  const uint32_t count = take<uint32_t>(in, off, "entry count");
  std::vector<CheckpointEntry> entries(count);
  std::vector<std::pair<uint64_t, uint64_t>> spans(count);
  for (uint32_t i = 0; i < count; ++i) {
    auto& e = entries[i];
    const uint16_t name_len = take<uint16_t>(in, off, "name length");
    if (off + name_len > in.size()) throw std::runtime_error("checkpoint: truncated name in " + path);
    e.name.assign(in.data() + off, name_len);
    off += name_len;
    e.dtype = take<uint8_t>(in, off, "dtype");
    const uint8_t ndim = take<uint8_t>(in, off, "rank");
    e.shape.resize(ndim);
    for (uint8_t d = 0; d < ndim; ++d) e.shape[d] = static_cast<int>(take<uint32_t>(in, off, "dim"));
    spans[i].first = take<uint64_t>(in, off, "offset");
    spans[i].second = take<uint64_t>(in, off, "size");
  }
  const uint64_t payload_size = take<uint64_t>(in, off, "payload size");
  if (off + payload_size != in.size())
    throw std::runtime_error("checkpoint: payload size mismatch in " + path + " (expected " +
                             std::to_string(payload_size) + " bytes, file has " + std::to_string(in.size() - off) +
                             ")");
  for (uint32_t i = 0; i < count; ++i) {
    if (spans[i].first + spans[i].second > payload_size)
      throw std::runtime_error("checkpoint: entry " + entries[i].name + " overruns payload in " + path);
    entries[i].bytes.assign(in.data() + off + spans[i].first, in.data() + off + spans[i].first + spans[i].second);
  }
  return entries;
}

namespace {

CheckpointEntry tensor_entry(const std::string& name, const Tensor<float>& t) {
  CheckpointEntry e;
  e.name = name;
  e.dtype = 0;
  e.shape = t.shape();
  e.bytes.resize(t.size() * sizeof(float));
  std::memcpy(e.bytes.data(), t.data(), e.bytes.size());
  return e;
}

void entry_to_tensor(const CheckpointEntry& e, Tensor<float>& t) {
  if (e.dtype != 0) throw std::runtime_error("checkpoint: entry " + e.name + " is not float32");
  if (e.shape != t.shape() && Tensor<float>::numel(e.shape) != t.size())
    throw std::runtime_error("checkpoint: entry " + e.name + " has shape " + shape_str(e.shape) + ", expected " +
                             shape_str(t.shape()));
  std::memcpy(t.data(), e.bytes.data(), e.bytes.size());
}

}  // namespace

std::vector<CheckpointEntry> model_to_entries(Model<float>& model) {
  std::vector<CheckpointEntry> entries;
  for (auto& np : model.named_params()) entries.push_back(tensor_entry(np.name, np.param->value));
  for (auto& nb : model.named_buffers()) entries.push_back(tensor_entry(nb.name, *nb.tensor));
  return entries;
}

void save_model(const std::string& path, Model<float>& model) {
  write_checkpoint(path, model_to_entries(model));
}

void load_model(const std::string& path, Model<float>& model) {
  auto entries = read_checkpoint(path);
  std::map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;

  // grow instance branches to match the manifest
  int branch_count = 0;
  while (by_name.count("ia.instance." + std::to_string(branch_count) + ".weight")) ++branch_count;
  if (branch_count == 0) throw std::runtime_error("checkpoint: no instance branches in " + path);
  Rng dummy(0);
  model.ia.branches.clear();
  for (int k = 0; k < branch_count; ++k) model.ia.new_instance_head(dummy, 0.0);

  for (auto& np : model.named_params()) {
    auto it = by_name.find(np.name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint: missing parameter " + np.name + " in " + path);
    entry_to_tensor(*it->second, np.param->value);
  }
  for (auto& nb : model.named_buffers()) {
    auto it = by_name.find(nb.name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint: missing buffer " + nb.name + " in " + path);
    entry_to_tensor(*it->second, *nb.tensor);
  }
}

}  // namespace manet
