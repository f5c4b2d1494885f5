#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace teq {

/// Deterministic RNG. Wraps std::mt19937_64 (bit-exact across platforms) but
/// implements the uniform/normal mappings explicitly: the std distributions
/// are implementation-defined and would break byte-reproducible outputs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; consumes two uniforms per pair.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // Guard log(0).
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.141592653589793238462643 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// splitmix64 finalizer; used to combine seed components.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t combine_seed(std::uint64_t a, std::uint64_t b) {
    return mix_seed(a ^ mix_seed(b));
}

/// Deterministic per-scene / per-frame seed: hash(global, scene, frame).
inline std::uint64_t derive_seed(std::uint64_t global, std::string_view tag,
                                 std::uint64_t index) {
    std::uint64_t h = mix_seed(global);
    for (char ch : tag) h = mix_seed(h ^ static_cast<unsigned char>(ch));
    return combine_seed(h, index);
}

} // namespace teq
