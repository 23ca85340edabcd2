#pragma once

namespace sgobs {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace sgobs
