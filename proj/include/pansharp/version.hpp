#pragma once

namespace pansharp {

inline constexpr const char* kVersion = "0.1.0";

} // namespace pansharp
