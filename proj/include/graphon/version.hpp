#pragma once

namespace graphon {

inline constexpr const char* version_string = "0.1.0";

}  // namespace graphon
