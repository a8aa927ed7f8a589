#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace signflow {

// Deterministic seed derivation. Every random draw in the project flows
// through a stream keyed by (root seed, purpose tag, indices), so results
// are reproducible regardless of call order, thread scheduling, or the
// total sequence length requested.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

class RngStream {
  public:
    RngStream() : eng_(0) {}
    explicit RngStream(std::uint64_t seed) : eng_(seed) {}

    static RngStream derive(std::uint64_t seed, std::string_view tag,
                            std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0) {
        std::uint64_t s = splitmix64(seed ^ hash_tag(tag));
        s = splitmix64(s ^ (a * 0x9e3779b97f4a7c15ULL));
        s = splitmix64(s ^ (b * 0xd1b54a32d192ed03ULL));
        s = splitmix64(s ^ (c * 0x8cb92ba72f3d8dd7ULL));
        return RngStream(s);
    }

    // Uniform in [0, 1) with 53 bits of entropy; bit-stable across platforms.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; avoids std::normal_distribution's unspecified state.
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::uint64_t next_u64() { return eng_(); }

    // Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n) { return n == 0 ? 0 : eng_() % n; }

  private:
    std::mt19937_64 eng_;
};

}  // namespace signflow
