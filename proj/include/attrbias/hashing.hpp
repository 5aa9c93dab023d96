#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace attrbias {

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

// First eight bytes of the SHA-256 digest, big-endian. Stable across
// platforms, used to derive per-instance sampling seeds.
std::uint64_t stable_hash64(std::string_view data);

std::string sha256_file(const std::string& path);

}  // namespace attrbias
