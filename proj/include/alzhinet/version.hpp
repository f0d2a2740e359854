#pragma once

namespace alzhinet {

inline constexpr const char* kToolVersion = "1.0.0";

}  // namespace alzhinet
