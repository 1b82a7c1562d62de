#pragma once

namespace shiftfunc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace shiftfunc
