#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace svbsc {

// splitmix64 finalizer; used to derive decorrelated per-task seeds so that
// results do not depend on worker count or execution order.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(master ^ 0x5bf03635ab7ec5a9ULL) ^ splitmix64(a) ^ (b + 0x9e3779b97f4a7c15ULL));
}

// Deterministic random stream: mt19937_64 core (bit-exact per the standard)
// with explicit uint64 -> double conversion and Box-Muller normals, so draws
// are reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t u64() { return engine_(); }

    // uniform in [0, 1), 53-bit resolution
    double uniform01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1]; safe as a log() argument
    double uniform01_open_low() { return static_cast<double>((u64() >> 11) + 1) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform01_open_low()));
        const double t = 6.283185307179586476925286766559 * uniform01();
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    // circularly-symmetric complex normal with total variance `var`
    // (each component has variance var/2), returned as a component pair
    void cnormal(double var, double& re, double& im) {
        const double s = std::sqrt(0.5 * var);
        re = s * normal();
        im = s * normal();
    }

    std::uint8_t bit() { return static_cast<std::uint8_t>(u64() >> 63); }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        // rejection-free modulo bias is negligible for the n used here,
        // but keep it exact anyway
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
        std::uint64_t x = u64();
        while (x > limit) x = u64();
        return x % n;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace svbsc
