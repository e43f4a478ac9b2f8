#pragma once

namespace hteselect {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace hteselect
