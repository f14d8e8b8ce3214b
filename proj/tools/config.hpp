#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ybpop/params.hpp"

namespace ybtool {

struct RunConfig {
  yb::ModelParams params;
  std::uint64_t master_seed = 1;
  long long ensemble_size = 400;
  long long burn_pairs = 10000;
  long long snapshot_count = 1024;
  std::filesystem::path output_dir = "out";

  void validate() const;  // throws std::invalid_argument
};

// Flat key=value lines, '#' comments, blank lines allowed. Unknown keys are
// rejected so typos fail loudly.
RunConfig load_config(const std::filesystem::path& path);
void apply_key(RunConfig& config, const std::string& key,
               const std::string& value);

// Canonical serialization (fixed key order); feeding it back through
// load_config reproduces the configuration exactly.
std::string serialize_config(const RunConfig& config);

std::uint64_t config_hash(const std::string& canonical);

// Manifest: the canonical config plus provenance comments. A manifest is
// itself a valid --config file, so a run can be reproduced from it alone.
void write_manifest(const std::filesystem::path& path, const RunConfig& config,
                    const std::string& command);

// Accepts "0.0009765625" or "1/1024".
double parse_distance(const std::string& text);

inline constexpr const char* kToolVersion = "1.0.0";

}  // namespace ybtool
