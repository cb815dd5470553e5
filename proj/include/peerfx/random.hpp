#pragma once

#include <cstdint>
#include <limits>

namespace peerfx {

// SplitMix64. Small state, so one engine per dyad is cheap; substream()
// derives independent streams from (seed, counter) which keeps simulated
// output independent of how work is split across workers.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t state) : state_(state) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

inline SplitMix64 substream(std::uint64_t seed, std::uint64_t counter) {
    SplitMix64 mix(seed);
    const std::uint64_t base = mix();
    SplitMix64 keyed(base ^ (counter * 0xd1b54a32d192ed03ULL));
    return SplitMix64(keyed());
}

// Uniform on the open interval (0, 1).
inline double uniform_open(SplitMix64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace peerfx
