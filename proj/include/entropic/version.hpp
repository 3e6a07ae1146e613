#pragma once

namespace entropic {

inline constexpr const char* kVersion = "0.1.0";

} // namespace entropic
