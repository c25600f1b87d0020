#pragma once

namespace prc {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kArtifactSchema = "v1";

}  // namespace prc
