#include "config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ybtool {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": " + v);
  }
}

long long to_ll(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const long long out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer for " + key + ": " + v);
  }
}

std::string format_double(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

}  // namespace

void RunConfig::validate() const {
  params.validate();
  if (ensemble_size < 1 || burn_pairs < 1 || snapshot_count < 1)
    throw std::invalid_argument("config: all counts must be >= 1");
}

void apply_key(RunConfig& config, const std::string& key,
               const std::string& value) {
  if (key == "maturation_age") {
    config.params.maturation_age = to_double(value, key);
  } else if (key == "max_age") {
    config.params.max_age = to_double(value, key);
  } else if (key == "steps_per_year") {
    config.params.steps_per_year = static_cast<int>(to_ll(value, key));
  } else if (key == "fecundity_cap") {
    config.params.fecundity_cap = to_double(value, key);
  } else if (key == "decay_exponent") {
    config.params.decay_exponent = to_double(value, key);
  } else if (key == "winter_fraction") {
    config.params.winter_fraction = to_double(value, key);
  } else if (key == "season_slack") {
    config.params.season_slack = to_double(value, key);
  } else if (key == "survival_mode") {
    if (value == "2p+1") {
      config.params.survival_mode = yb::SurvivalMode::kFullLifetime;
    } else if (value == "2p") {
      config.params.survival_mode = yb::SurvivalMode::kLifetime;
    } else {
      throw std::invalid_argument("config: survival_mode must be 2p or 2p+1");
    }
  } else if (key == "master_seed") {
    config.master_seed = static_cast<std::uint64_t>(to_ll(value, key));
  } else if (key == "ensemble_size") {
    config.ensemble_size = to_ll(value, key);
  } else if (key == "burn_pairs") {
    config.burn_pairs = to_ll(value, key);
  } else if (key == "snapshot_count") {
    config.snapshot_count = to_ll(value, key);
  } else if (key == "output_dir") {
    config.output_dir = value;
  } else {
    throw std::invalid_argument("config: unknown key: " + key);
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("config: cannot open " + path.string());
  RunConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  " is not key=value: " + body);
    apply_key(config, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
  return config;
}

std::string serialize_config(const RunConfig& config) {
  std::ostringstream out;
  out << "maturation_age=" << format_double(config.params.maturation_age) << '\n'
      << "max_age=" << format_double(config.params.max_age) << '\n'
      << "steps_per_year=" << config.params.steps_per_year << '\n'
      << "fecundity_cap=" << format_double(config.params.fecundity_cap) << '\n'
      << "decay_exponent=" << format_double(config.params.decay_exponent) << '\n'
      << "winter_fraction=" << format_double(config.params.winter_fraction) << '\n'
      << "season_slack=" << format_double(config.params.season_slack) << '\n'
      << "survival_mode="
      << (config.params.survival_mode == yb::SurvivalMode::kFullLifetime
              ? "2p+1"
              : "2p")
      << '\n'
      << "master_seed=" << config.master_seed << '\n'
      << "ensemble_size=" << config.ensemble_size << '\n'
      << "burn_pairs=" << config.burn_pairs << '\n'
      << "snapshot_count=" << config.snapshot_count << '\n'
      << "output_dir=" << config.output_dir.string() << '\n';
  return out.str();
}

std::uint64_t config_hash(const std::string& canonical) {
  // FNV-1a
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void write_manifest(const std::filesystem::path& path, const RunConfig& config,
                    const std::string& command) {
  const std::string canonical = serialize_config(config);
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw std::runtime_error("manifest: cannot open " + path.string());
  out << "# ybpop manifest (valid --config input)\n"
      << "# command: " << command << '\n'
      << "# ybpop_version: " << kToolVersion << '\n'
      << "# config_hash: " << config_hash(canonical) << '\n'
      << canonical;
  if (!out)
    throw std::runtime_error("manifest: write failed for " + path.string());
}

double parse_distance(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) {
    return to_double(text, "distance");
  }
  const double num = to_double(trim(text.substr(0, slash)), "distance");
  const double den = to_double(trim(text.substr(slash + 1)), "distance");
  if (den == 0.0) throw std::invalid_argument("distance: division by zero");
  return num / den;
}

}  // namespace ybtool
