#pragma once

namespace bdss {

inline constexpr const char* kVersion = "0.3.0";

}  // namespace bdss
