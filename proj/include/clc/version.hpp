#pragma once

namespace clc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace clc
