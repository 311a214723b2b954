#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace legal_synth {

using Sha256Digest = std::array<std::uint8_t, 32>;

Sha256Digest sha256(std::string_view data);

// Lowercase hex of the SHA-256 digest.
std::string sha256_hex(std::string_view data);

// First eight digest bytes read big-endian.
std::uint64_t hash64(std::string_view data);

std::string to_hex(const std::uint8_t* bytes, std::size_t n);

}  // namespace legal_synth
