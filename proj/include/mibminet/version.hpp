#pragma once

namespace mibminet {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mibminet
