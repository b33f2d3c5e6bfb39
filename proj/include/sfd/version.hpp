#pragma once

namespace sfd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sfd
