#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "longrisk/tensor.hpp"

namespace longrisk {

/// Self-describing binary parameter container.
///
/// Layout (all integers and floats little-endian regardless of host):
///   magic   8 bytes  "LNGRISK\0"
///   u32     format version
///   u64     metadata length, followed by that many bytes of UTF-8 JSON
///   u64     entry count
///   entries: u32 name length, name bytes, u32 ndim, u64 dims..., f64 data...
struct Checkpoint {
  struct Entry {
    std::string name;
    Shape shape;
    std::vector<double> data;
  };

  nlohmann::json meta;
  std::vector<Entry> entries;

  const Entry* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& params,
                     const nlohmann::json& meta);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace longrisk
