#pragma once

namespace fisherflow {

inline constexpr const char* version_string = "0.1.0";

} // namespace fisherflow
