#pragma once

namespace ropf {
inline constexpr const char* kToolVersion = "0.1.0";
}
