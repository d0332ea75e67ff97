#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ttifair {

// A named, reproducible random stream. The engine is std::mt19937_64, whose
// output sequence is fixed by the standard; the mapping to integers, reals and
// normals is done here so results are identical across standard libraries.
//
// Streams are keyed by (master_seed, name). Substreams derive from the parent
// key only, never from its consumed state, so the order in which substreams are
// created does not matter and parallel workers can each own one.
class RandomStream {
public:
    RandomStream(std::uint64_t master_seed, std::string_view name);

    RandomStream substream(std::string_view name) const;
    RandomStream substream(std::uint64_t index) const;

    std::uint64_t key() const noexcept { return key_; }

    std::uint64_t next_u64() { return engine_(); }
    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform01();
    // Uniform in [0, n); n must be > 0. Unbiased.
    std::uint64_t below(std::uint64_t n);
    // Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    double normal(double mean, double stddev);

private:
    explicit RandomStream(std::uint64_t key);

    std::uint64_t key_;
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace ttifair
