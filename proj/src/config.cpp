#include "manet/config.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace manet {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_num(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T out;
  in >> out;
  if (!in || !in.eof()) throw std::invalid_argument("config: bad value '" + v + "' for key " + key);
  return out;
}

std::string fmt(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

const std::vector<Field>& fields() {
#define NUM_FIELD(name) \
  Field{#name, [](RunConfig& c, const std::string& v) { c.name = parse_num<decltype(c.name)>(#name, v); }, \
        [](const RunConfig& c) { return fmt(double(c.name)); }}
  static const std::vector<Field> f = {
      Field{"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_num<uint64_t>("seed", v); },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      NUM_FIELD(lrn_n),
      NUM_FIELD(lrn_k),
      NUM_FIELD(lrn_alpha),
      NUM_FIELD(lrn_beta),
      NUM_FIELD(bn_momentum),
      NUM_FIELD(bn_eps),
      NUM_FIELD(dropout_rate),
      NUM_FIELD(mmd_kernel_count),
      NUM_FIELD(mmd_weight_budget),
      NUM_FIELD(offline_iters),
      NUM_FIELD(lr),
      NUM_FIELD(weight_decay),
      NUM_FIELD(train_input_size),
      Field{"init_scheme",
            [](RunConfig& c, const std::string& v) {
              if (v != "fan_in" && v != "fixed_std") throw std::invalid_argument("config: init_scheme must be fan_in or fixed_std");
              c.init_scheme = v;
            },
            [](const RunConfig& c) { return c.init_scheme; }},
      NUM_FIELD(trans_sigma),
      NUM_FIELD(scale_sigma),
      NUM_FIELD(init_pos),
      NUM_FIELD(init_neg),
      NUM_FIELD(init_iters),
      NUM_FIELD(lr_instance),
      NUM_FIELD(lr_other_ia),
      NUM_FIELD(long_interval),
      NUM_FIELD(memory_long),
      NUM_FIELD(memory_short),
      NUM_FIELD(update_iters),
      NUM_FIELD(update_pos_per_frame),
      NUM_FIELD(update_neg_per_frame),
      NUM_FIELD(candidates),
      NUM_FIELD(ridge_lambda),
      NUM_FIELD(synth_width),
      NUM_FIELD(synth_height),
      NUM_FIELD(synth_frames),
      NUM_FIELD(synth_train_seqs),
      NUM_FIELD(synth_test_seqs),
  };
#undef NUM_FIELD
  return f;
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (f.key == key) {
      f.set(*this, value);
      return;
    }
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) + " of " + path + " is not 'key = value'");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

void RunConfig::load_file(const std::string& path) {
  for (const auto& [k, v] : parse_kv_file(path)) apply(k, v);
}

std::string RunConfig::echo() const {
  std::ostringstream out;
  for (const Field& f : fields()) out << f.key << " = " << f.get(*this) << "\n";
  return out.str();
}

void RunConfig::write_echo(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream f(std::filesystem::path(dir) / "config_effective.txt");
  f << echo();
}

}  // namespace manet
