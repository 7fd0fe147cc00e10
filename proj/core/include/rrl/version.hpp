#pragma once

namespace rrl {

inline constexpr const char* kVersion = "0.1.0";

// Bumped whenever the on-disk layout of checkpoints / prototype files changes.
inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr int kPrototypeFormatVersion = 1;

}  // namespace rrl
