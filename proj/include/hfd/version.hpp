#pragma once

namespace hfd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace hfd
