#ifndef CEGATE_RNG_HPP
#define CEGATE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "cegate/check.hpp"

namespace cegate {

// splitmix64 finalizer; used to derive independent seeds from (seed, tag) pairs
// so that auxiliary streams (noise, Fisher draws) never disturb the main one.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return mix_seed(a ^ mix_seed(b));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_seed(mix_seed(a, b) ^ mix_seed(c));
}

// Deterministic RNG. All distributions are implemented on top of the raw
// 64-bit stream (std distributions are implementation-defined and would break
// bit-exact reproducibility guarantees).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::size_t below(std::size_t n) {
        check(n > 0, "Rng::below requires n > 0");
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(engine_()) * n) >> 64);
    }

    // standard normal via Box-Muller; two uniforms per draw, no cached spare
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log1p(-u1));
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::string serialize() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void deserialize(const std::string& s) {
        std::istringstream is(s);
        is >> engine_;
        check_io(!is.fail(), "invalid rng state string");
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace cegate

#endif
