#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "riskmap/io.hpp"
#include "riskmap/mcmc.hpp"

namespace riskmap {

struct RunConfig {
  std::string counts = "counts.csv";
  std::string regions = "regions.csv";
  std::string adjacency = "adjacency.csv";
  std::string merge;  // optional merge directive
  CountMode count_mode = CountMode::Daily;
  ModelOptions model;
  McmcConfig mcmc;
  int horizon = 4;
  int bins = 20;
  std::string output_dir = "out";

  // simulate
  int sim_regions = 5;
  int sim_days = 90;
  double sim_rate = 1e-4;
  HyperParams truth;
};

// Every key accepted in a config file (and as a --key flag).
const std::vector<std::string>& config_keys();

// key = value lines; '#' starts a comment. Relative paths in the file are
// resolved against the file's directory. Throws ConfigError.
std::map<std::string, std::string> read_config_file(const std::string& path);

// Applies key/value pairs on top of the defaults. Throws ConfigError on
// unknown keys or malformed values.
RunConfig build_config(const std::map<std::string, std::string>& values);

}  // namespace riskmap
