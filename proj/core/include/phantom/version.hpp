#pragma once

namespace phantom {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace phantom
