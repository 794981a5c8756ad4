#pragma once

namespace stoplab {

inline constexpr const char* kVersion = "0.1.0";

} // namespace stoplab
