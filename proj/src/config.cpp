#include "sempe/config.hpp"

#include <fstream>
#include <sstream>

namespace sempe {

ConfigResult parse_config(const std::string& text) {
  ConfigResult r;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& m) {
    r.ok = false;
    r.error = "config line " + std::to_string(lineno) + ": " + m;
    return r;
  };
  while (std::getline(is, line)) {
    lineno++;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t\r");
    line = line.substr(a, b - a + 1);
    size_t eq = line.find('=');
    if (eq == std::string::npos) return fail("expected key=value");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      size_t x = s.find_first_not_of(" \t");
      size_t y = s.find_last_not_of(" \t");
      s = x == std::string::npos ? "" : s.substr(x, y - x + 1);
    };
    trim(key);
    trim(val);
    int64_t num = 0;
    try {
      num = std::stoll(val, nullptr, 0);
    } catch (...) {
      return fail("value for '" + key + "' must be an integer");
    }

    auto& m = r.config.machine;
    if (key == "registers") {
      if (num < 1 || num > 256) return fail("registers must be in [1, 256]");
      r.config.register_override = static_cast<int>(num);
    } else if (key == "capacity") {
      if (num < 1 || num > 4096) return fail("capacity must be in [1, 4096]");
      m.jb_capacity = static_cast<int>(num);
    } else if (key == "step_limit") {
      if (num < 1) return fail("step_limit must be positive");
      m.step_limit = num;
    } else if (key == "base_cpi") {
      if (num < 1) return fail("base_cpi must be positive");
      m.timing.base_cpi = num;
    } else if (key == "drain_penalty") {
      if (num < 0) return fail("drain_penalty must be nonnegative");
      m.timing.drain_penalty = num;
    } else if (key == "spm_bytes_per_cycle") {
      if (num < 1) return fail("spm_bytes_per_cycle must be positive");
      m.timing.spm_bytes_per_cycle = num;
    } else if (key == "cache") {
      m.timing.cache_enabled = num != 0;
    } else if (key == "cache_size") {
      if (num < 64) return fail("cache_size must be at least one line");
      m.timing.cache_size = num;
    } else if (key == "cache_ways") {
      if (num < 1) return fail("cache_ways must be positive");
      m.timing.cache_ways = num;
    } else if (key == "cache_line") {
      if (num < 8) return fail("cache_line must be at least one word");
      m.timing.cache_line = num;
    } else if (key == "cache_miss_penalty") {
      if (num < 0) return fail("cache_miss_penalty must be nonnegative");
      m.timing.cache_miss_penalty = num;
    } else {
      return fail("unknown key '" + key + "'");
    }
  }
  r.ok = true;
  return r;
}

ConfigResult load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    ConfigResult r;
    r.error = "cannot open config file '" + path + "'";
    return r;
  }
  std::ostringstream os;
  os << f.rdbuf();
  return parse_config(os.str());
}

}  // namespace sempe
