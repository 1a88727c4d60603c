#pragma once

#include <string>

#include "manet/config.hpp"

namespace manet::cli {

int cmd_synth(const RunConfig& cfg, const std::string& out_dir);
int cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir);
int cmd_track(const RunConfig& cfg, const std::string& seq_dir, const std::string& checkpoint,
              const std::string& out_dir, bool overlay);
int cmd_eval(const RunConfig& cfg, const std::string& seq_dir, const std::string& trajectory,
             const std::string& out_dir);
int cmd_gradcheck(const RunConfig& cfg, const std::string& out_dir, bool inject_error);
int cmd_dump_features(const RunConfig& cfg, const std::string& seq_dir, const std::string& checkpoint,
                      const std::string& out_dir);

}  // namespace manet::cli
