#pragma once

namespace wgbs {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace wgbs
