#include "longrisk/appconfig.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "longrisk/errors.hpp"
#include "longrisk/version.hpp"

namespace fs = std::filesystem;

namespace longrisk {

nlohmann::json RunManifest::to_json() const {
  return nlohmann::json{{"command", command},
                        {"config_path", config_path},
                        {"master_seed", master_seed},
                        {"inputs", inputs},
                        {"outputs", outputs},
                        {"effective_config", effective_config},
                        {"tool_version", tool_version},
                        {"timestamp", timestamp}};
}

void write_run_manifest(const std::string& dir, const RunManifest& manifest) {
  std::ofstream out(fs::path(dir) / "run_manifest.json");
  if (!out) throw IoError("cannot write run manifest in " + dir);
  out << manifest.to_json().dump(2) << "\n";
}

std::string iso_timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string resolve_output_dir(const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  const char* root = std::getenv("LONGRISK_OUTPUT_ROOT");
  if (!root || !*root) return path;
  return (fs::path(root) / path).string();
}

void prepare_output_dir(const std::string& dir, bool force) {
  fs::path p(dir);
  if (fs::exists(p)) {
    if (!fs::is_directory(p)) {
      throw IoError("output path exists and is not a directory: " + dir);
    }
    if (!fs::is_empty(p) && !force) {
      throw IoError("output directory is not empty (use --force to overwrite): " +
                    dir);
    }
  }
  fs::create_directories(p);
}

std::uint64_t fingerprint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot fingerprint missing file: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!in) break;
  }
  return h;
}

}  // namespace longrisk
