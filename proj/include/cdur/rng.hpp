#pragma once

#include <cstdint>
#include <string_view>

namespace cdur {

// Counter-based deterministic generator built on the SplitMix64 finalizer
// (Steele, Lea & Flood 2014; mixing constants are Stafford's Mix13 variant).
// The n-th output of a stream with key k is mix(k + n * kGolden), so every
// draw is a pure function of (key, counter). Child streams are addressed by
// a label and never consume from or advance the parent, which makes draws
// reproducible regardless of evaluation order.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return mix(key_ + (++count_) * kGolden); }

    // uniform on [0, 1) with 53 random bits
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool next_bernoulli(double p) { return next_double() < p; }

    // independent stream addressed by (key, label); ignores this stream's counter
    SplitMix64 split(std::uint64_t label) const {
        return SplitMix64(mix(key_ ^ mix(label + kSplitSalt)));
    }

    std::uint64_t key() const { return key_; }

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
    static constexpr std::uint64_t kSplitSalt = 0x5851F42D4C957F2DULL;

    std::uint64_t key_;
    std::uint64_t count_ = 0;
};

// FNV-1a, used to turn textual identifiers (study cell ids) into stream labels.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace cdur
