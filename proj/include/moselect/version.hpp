#pragma once

namespace moselect {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace moselect
