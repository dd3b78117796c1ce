#pragma once

namespace lodom {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace lodom
