#pragma once

namespace qdmeta {

inline constexpr const char* kVersion = "0.1.0";

} // namespace qdmeta
