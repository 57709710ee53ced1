#pragma once

namespace mcoh {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mcoh
