#pragma once

#include <cmath>
#include <cstdint>

namespace stoplab {

// Counter-based RNG. Every draw is a pure function of (stream key, counter),
// so replicate-level streams are reproducible no matter how work is scheduled
// across threads.
namespace rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer (Stafford mix13).
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

// Derives a substream key from (master seed, purpose tag, replicate index).
inline constexpr std::uint64_t derive_key(std::uint64_t master, std::uint64_t tag,
                                          std::uint64_t replicate) noexcept {
    std::uint64_t k = mix64(master + kGolden);
    k = mix64(k ^ (tag + kGolden));
    k = mix64(k ^ (replicate + kGolden));
    return k;
}

inline constexpr std::uint64_t draw_u64(std::uint64_t key, std::uint64_t counter) noexcept {
    return mix64(key + (counter + 1) * kGolden);
}

// Maps a u64 to (0, 1); never returns 0 or 1 exactly.
inline constexpr double u64_to_unit(std::uint64_t x) noexcept {
    return static_cast<double>(x >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

// Purpose tags for substream derivation.
inline constexpr std::uint64_t kTagIncrements = 0x01;
inline constexpr std::uint64_t kTagBridge = 0x02;
inline constexpr std::uint64_t kTagLaw = 0x03;
inline constexpr std::uint64_t kTagPlayer1 = 0x10;
inline constexpr std::uint64_t kTagPlayer2 = 0x20;
inline constexpr std::uint64_t kTagCurve = 0x30;
inline constexpr std::uint64_t kTagEvents = 0x40;
inline constexpr std::uint64_t kTagTail = 0x50;

} // namespace rng

// A stateful view over a counter-based stream. Draw order within a replicate
// is fixed by the caller; two Substreams with the same key produce the same
// sequence.
class Substream {
public:
    Substream(std::uint64_t master, std::uint64_t tag, std::uint64_t replicate)
        : key_(rng::derive_key(master, tag, replicate)) {}

    explicit Substream(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return rng::draw_u64(key_, counter_++); }

    double uniform() { return rng::u64_to_unit(next_u64()); }

    // Indexed access; does not advance the stream.
    double uniform_at(std::uint64_t counter) const {
        return rng::u64_to_unit(rng::draw_u64(key_, counter));
    }

    // N(0,1) via Box-Muller; the second value of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace stoplab
