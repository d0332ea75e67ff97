#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ttifair {

// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

// 64-bit FNV-1a, used to key PRNG substreams by name.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace ttifair
