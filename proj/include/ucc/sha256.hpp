#pragma once

#include <string>

namespace ucc {

/// Hex digest of the SHA-256 hash of `data`. Self-contained, platform-stable.
std::string sha256_hex(const std::string& data);

} // namespace ucc
