#pragma once

namespace satsol {

// Stamped into every JSON artifact and every cache key.
inline constexpr const char* kVersion = "0.1.0";

}  // namespace satsol
