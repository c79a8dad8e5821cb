#include "riskmap/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "riskmap/errors.hpp"

namespace riskmap {
namespace {

const char* const kPathKeys[] = {"counts", "regions", "adjacency", "merge"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_integer(const std::string& key, const std::string& text) {
  T x{};
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, x);
  if (text.empty() || r.ec != std::errc() || r.ptr != end) {
    throw ConfigError("config '" + key + "': '" + text + "' is not an integer");
  }
  return x;
}

double parse_number(const std::string& key, const std::string& text) {
  if (text == "inf" || text == "Inf" || text == "infinity") {
    return std::numeric_limits<double>::infinity();
  }
  double x = 0.0;
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, x);
  if (text.empty() || r.ec != std::errc() || r.ptr != end || std::isnan(x)) {
    throw ConfigError("config '" + key + "': '" + text + "' is not a number");
  }
  return x;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "no" || text == "0") return false;
  throw ConfigError("config '" + key + "': expected true or false, got '" + text + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k = {
        "counts",      "regions",        "adjacency",    "merge",       "count_mode",
        "bym_convention", "sum_to_zero", "reference_rate", "chains",    "iterations",
        "burn_in",     "thin",           "seed",         "adapt_window", "target_accept",
        "target_accept_scalar", "init_from_mode", "horizon", "bins",     "output_dir",
        "sim_regions", "sim_days",       "sim_rate"};
    for (const auto& name : kHyperNames) k.push_back("true_" + std::string(name));
    return k;
  }();
  return keys;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  std::map<std::string, std::string> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    const auto& keys = config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError(path + ":" + std::to_string(number) + ": unknown key '" + key + "'");
    }
    for (const char* p : kPathKeys) {
      if (key == p && !value.empty() && std::filesystem::path(value).is_relative()) {
        value = (base / value).lexically_normal().string();
      }
    }
    if (!out.emplace(key, value).second) {
      throw ConfigError(path + ":" + std::to_string(number) + ": key '" + key + "' repeated");
    }
  }
  return out;
}

RunConfig build_config(const std::map<std::string, std::string>& values) {
  RunConfig c;
  std::array<double, kNumHyper> truth = c.truth.to_array();
  const auto& keys = config_keys();
  for (const auto& [key, v] : values) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    if (key == "counts") c.counts = v;
    else if (key == "regions") c.regions = v;
    else if (key == "adjacency") c.adjacency = v;
    else if (key == "merge") c.merge = v;
    else if (key == "count_mode") c.count_mode = parse_count_mode(v);
    else if (key == "bym_convention") {
      if (v == "as_printed") c.model.bym_convention = BymConvention::AsPrinted;
      else if (v == "riebler") c.model.bym_convention = BymConvention::Riebler;
      else throw ConfigError("config 'bym_convention': expected as_printed or riebler");
    } else if (key == "sum_to_zero") c.model.sum_to_zero = parse_bool(key, v);
    else if (key == "reference_rate") {
      if (!v.empty()) c.model.reference_rate = parse_number(key, v);
    } else if (key == "chains") c.mcmc.chains = parse_integer<int>(key, v);
    else if (key == "iterations") c.mcmc.iterations = parse_integer<int>(key, v);
    else if (key == "burn_in") c.mcmc.burn_in = parse_integer<int>(key, v);
    else if (key == "thin") c.mcmc.thin = parse_integer<int>(key, v);
    else if (key == "seed") c.mcmc.seed = parse_integer<std::uint64_t>(key, v);
    else if (key == "adapt_window") c.mcmc.adapt_window = parse_integer<int>(key, v);
    else if (key == "target_accept") c.mcmc.target_accept = parse_number(key, v);
    else if (key == "target_accept_scalar") c.mcmc.target_accept_scalar = parse_number(key, v);
    else if (key == "init_from_mode") c.mcmc.init_from_mode = parse_bool(key, v);
    else if (key == "horizon") c.horizon = parse_integer<int>(key, v);
    else if (key == "bins") c.bins = parse_integer<int>(key, v);
    else if (key == "output_dir") c.output_dir = v;
    else if (key == "sim_regions") c.sim_regions = parse_integer<int>(key, v);
    else if (key == "sim_days") c.sim_days = parse_integer<int>(key, v);
    else if (key == "sim_rate") c.sim_rate = parse_number(key, v);
    else {
      for (int k = 0; k < kNumHyper; ++k) {
        if (key == "true_" + std::string(kHyperNames[static_cast<std::size_t>(k)])) {
          truth[static_cast<std::size_t>(k)] = parse_number(key, v);
        }
      }
    }
  }
  c.truth = HyperParams::from_array(truth);
  c.mcmc.validate();
  if (c.horizon < 0) throw ConfigError("config 'horizon' must be nonnegative");
  if (c.bins < 2) throw ConfigError("config 'bins' must be at least 2");
  if (c.model.reference_rate && !(*c.model.reference_rate > 0.0)) {
    throw ConfigError("config 'reference_rate' must be positive");
  }
  if (c.sim_regions < 2 || c.sim_days < 3) {
    throw ConfigError("config: simulation needs at least 2 regions and 3 days");
  }
  if (!(c.sim_rate > 0.0)) throw ConfigError("config 'sim_rate' must be positive");
  if (c.output_dir.empty()) throw ConfigError("config 'output_dir' is empty");
  return c;
}

}  // namespace riskmap
