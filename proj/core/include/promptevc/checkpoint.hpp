#pragma once

#include <map>
#include <string>
#include <vector>

#include "promptevc/config.hpp"
#include "promptevc/nn/params.hpp"
#include "promptevc/textmap.hpp"

namespace promptevc {

// Self-describing training snapshot. The config travels inside so a
// checkpoint can be loaded without the original config file.
struct Checkpoint {
  SystemConfig config;
  std::string phase;  // "pretrain" | "finetune"
  int epoch = 0;
  int64_t step = 0;
  Codebook codebook;
  std::vector<std::string> speakers;          // index = speaker id
  std::map<std::string, double> extras;       // running stats, best losses...
};

void save_checkpoint(const std::string& path, const Checkpoint& meta,
                     const nn::ParamStore& params);

// Reads metadata and fills `params` (creating entries as stored).
Checkpoint load_checkpoint(const std::string& path, nn::ParamStore& params);

// Metadata only; cheap peek for CLI display and compatibility checks.
Checkpoint read_checkpoint_meta(const std::string& path);

int speaker_index(const std::vector<std::string>& speakers,
                  const std::string& name);

}  // namespace promptevc
