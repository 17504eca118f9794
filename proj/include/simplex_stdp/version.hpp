#pragma once

namespace simplex_stdp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace simplex_stdp
