#pragma once

namespace futvol {

inline constexpr const char* kVersion = "0.3.0";

}  // namespace futvol
