#pragma once

#include <string_view>

namespace longrisk {

inline constexpr std::string_view kVersion = "0.1.0";

// Checkpoint container format revision. Bump when the binary layout changes.
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

}  // namespace longrisk
