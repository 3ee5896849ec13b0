#include "fedsurf/rng.hpp"

#include <cmath>

#include "fedsurf/errors.hpp"

namespace fedsurf {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) {
        word = splitmix64(s);
    }
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n == 0) throw ArgumentError("uniform_int: n must be positive");
    // Lemire's multiply-shift with rejection on the biased tail.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (lo < threshold) {
            x = next_u64();
            m = static_cast<__uint128_t>(x) * n;
            lo = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

double Rng::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform01() - 1.0;
        v = 2.0 * uniform01() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    cached_normal_ = v * f;
    has_cached_normal_ = true;
    return u * f;
}

double Rng::exponential() {
    double u;
    do {
        u = uniform01();
    } while (u == 0.0);
    return -std::log(u);
}

double Rng::gamma(double shape) {
    if (shape <= 0.0) throw ArgumentError("gamma: shape must be positive");
    if (shape < 1.0) {
        // Boost to shape+1 and scale back (Marsaglia-Tsang section 6).
        const double g = gamma(shape + 1.0);
        double u;
        do {
            u = uniform01();
        } while (u == 0.0);
        return g * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    while (true) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform01();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

std::vector<double> Rng::dirichlet(double alpha, std::size_t k) {
    if (k == 0) throw ArgumentError("dirichlet: k must be positive");
    std::vector<double> p(k);
    double total = 0.0;
    for (auto& value : p) {
        value = gamma(alpha);
        total += value;
    }
    for (auto& value : p) value /= total;
    return p;
}

Rng Rng::derive(std::uint64_t id) const {
    std::uint64_t mix = state_[0];
    mix ^= splitmix64(mix) + id * 0x9e3779b97f4a7c15ULL;
    std::uint64_t h = state_[2] ^ (id + 0x6a09e667f3bcc909ULL);
    return Rng(mix ^ splitmix64(h));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t id) {
    std::uint64_t s = seed ^ (stream * 0xd1342543de82ef95ULL);
    std::uint64_t a = splitmix64(s);
    s ^= id * 0x9e3779b97f4a7c15ULL;
    return a ^ splitmix64(s);
}

}  // namespace fedsurf
