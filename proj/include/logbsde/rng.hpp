#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "logbsde/common.hpp"

namespace logbsde {

// Philox4x32-10 counter-based generator (Salmon et al.). A draw is a pure
// function of (key, counter), so path p gets the same noise no matter how
// work is partitioned across threads or runs.
namespace philox {

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline std::array<std::uint32_t, 4> block(std::uint64_t key,
                                          std::array<std::uint32_t, 4> ctr) {
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
        const std::array<std::uint32_t, 4> next = {
            static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0,
            static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1,
            static_cast<std::uint32_t>(p0)};
        ctr = next;
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    return ctr;
}

}  // namespace philox

/// 64-bit avalanche mix (splitmix64 finalizer).
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Derives an independent stream key from a master seed and a module label.
/// Streams are tied to names, never to call order.
inline std::uint64_t derive_stream(std::uint64_t seed, std::string_view label) {
    std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
    for (char c : label) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001B3ull;
    }
    return mix64(seed ^ mix64(h));
}

/// Counter-based stream of uniforms and normals indexed by
/// (path, step, component).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    /// Uniform in the open interval (0, 1).
    Real uniform(std::uint64_t path, std::uint64_t step, std::uint32_t comp) const {
        const auto w = words(path, step, comp >> 1);
        const int half = static_cast<int>(comp & 1u) * 2;
        return to_unit(w[half], w[half + 1]);
    }

    /// Standard normal via Box-Muller on one Philox block; component c uses
    /// block c/2 so consecutive components stay independent.
    Real normal(std::uint64_t path, std::uint64_t step, std::uint32_t comp) const {
        const auto w = words(path, step, comp >> 1);
        const Real u1 = to_unit(w[0], w[1]);
        const Real u2 = to_unit(w[2], w[3]);
        const Real r = std::sqrt(-2.0 * std::log(u1));
        const Real a = 2.0 * std::numbers::pi_v<Real> * u2;
        return (comp & 1u) ? r * std::sin(a) : r * std::cos(a);
    }

private:
    std::array<std::uint32_t, 4> words(std::uint64_t path, std::uint64_t step,
                                       std::uint32_t blk) const {
        return philox::block(key_, {static_cast<std::uint32_t>(path),
                                    static_cast<std::uint32_t>(path >> 32),
                                    static_cast<std::uint32_t>(step), blk});
    }

    static Real to_unit(std::uint32_t hi, std::uint32_t lo) {
        const std::uint64_t v = (static_cast<std::uint64_t>(hi) << 32) | lo;
        return (static_cast<Real>(v >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t key_;
};

}  // namespace logbsde
