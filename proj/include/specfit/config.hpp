#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "specfit/simulator.hpp"

namespace specfit {

// Flat `key = value` simulation configs, `#` starts a comment. Per-source
// settings are comma lists (one value broadcasts to every source); peaks are
// `peak.<source>.<index>.<field>` with 1-based source and peak numbers.
SimConfig parse_sim_config(std::string_view text, const std::string& origin = "<config>");
std::string serialize_sim_config(const SimConfig& cfg);

// Loads a bundled preset by name, or else a config file from disk.
SimConfig load_sim_config(const std::string& name_or_path);

std::vector<std::string> preset_names();
// Throws ValidationError for unknown names.
std::string preset_text(const std::string& name);

}  // namespace specfit
