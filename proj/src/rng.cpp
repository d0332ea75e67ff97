#include "ttifair/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "ttifair/hash.hpp"

namespace ttifair {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

RandomStream::RandomStream(std::uint64_t key) : key_(key), engine_(key) {}

RandomStream::RandomStream(std::uint64_t master_seed, std::string_view name)
    : RandomStream(splitmix64(master_seed ^ fnv1a64(name))) {}

RandomStream RandomStream::substream(std::string_view name) const {
    return RandomStream(splitmix64(key_ ^ fnv1a64(name)));
}

RandomStream RandomStream::substream(std::uint64_t index) const {
    return RandomStream(splitmix64(splitmix64(key_) + index));
}

double RandomStream::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t RandomStream::below(std::uint64_t n) {
    // Rejection on the top of the range keeps every residue equally likely.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % n);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

std::int64_t RandomStream::uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(engine_());  // full 64-bit range
    return lo + static_cast<std::int64_t>(below(span));
}

double RandomStream::normal(double mean, double stddev) {
    // Box-Muller; u1 in (0, 1] avoids log(0).
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return mean + stddev * z;
}

}  // namespace ttifair
