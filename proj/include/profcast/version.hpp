#pragma once

namespace profcast {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace profcast
