#pragma once

namespace dash {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace dash
