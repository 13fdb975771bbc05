#pragma once

#include <string>

#include "sempe/machine.hpp"

namespace sempe {

struct RunConfig {
  MachineConfig machine;
  int register_override = 0;  // 0 keeps the program's register count
};

struct ConfigResult {
  bool ok = false;
  RunConfig config;
  std::string error;
};

// Flat key=value text, one pair per line, # comments. Keys: registers,
// capacity, step_limit, base_cpi, drain_penalty, spm_bytes_per_cycle, cache,
// cache_size, cache_ways, cache_line, cache_miss_penalty.
ConfigResult parse_config(const std::string& text);
ConfigResult load_config(const std::string& path);

}  // namespace sempe
