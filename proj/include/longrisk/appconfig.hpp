#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace longrisk {

/// Every command drops one of these into its output directory. Reruns with
/// the same manifest (modulo timestamp) reproduce the data outputs bit-exact.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t master_seed = 0;
  nlohmann::json inputs;
  nlohmann::json outputs;
  nlohmann::json effective_config;
  std::string tool_version;
  std::string timestamp;

  nlohmann::json to_json() const;
};

void write_run_manifest(const std::string& dir, const RunManifest& manifest);

std::string iso_timestamp_utc();

/// Relative paths get rooted at $LONGRISK_OUTPUT_ROOT when it is set.
std::string resolve_output_dir(const std::string& path);

/// Refuses a non-empty existing directory unless force; creates it otherwise.
void prepare_output_dir(const std::string& dir, bool force);

std::uint64_t fingerprint_file(const std::string& path);

}  // namespace longrisk
