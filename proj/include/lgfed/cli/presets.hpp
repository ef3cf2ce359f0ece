#pragma once

#include <string>
#include <vector>

#include "lgfed/cli/config.hpp"

namespace lgfed::cli {

struct Preset {
  std::string name;
  std::string command;  // theory | fed | hetero | fair
  std::string summary;
  Json config;          // partial config, merged over the defaults
};

const std::vector<Preset>& presets();
/// Throws ArgumentError naming the known presets of `command`.
const Preset& find_preset(const std::string& command, const std::string& name);

}  // namespace lgfed::cli
