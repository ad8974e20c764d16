#pragma once

namespace deepfactor {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace deepfactor
