#pragma once

#include <cstdint>
#include <vector>

namespace fedsurf {

// Deterministic xoshiro256++ generator seeded through SplitMix64.
//
// The standard library distributions are implementation-defined, so every
// draw this simulator needs (uniform, bounded int, normal, exponential,
// gamma, shuffles) is implemented here. Results are identical across
// platforms and across runs for the same seed, which the determinism
// guarantees of the forest and federation code rely on.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Double in [0, 1) with 53 random bits.
    double uniform01();

    // Integer in [0, n), unbiased (Lemire rejection). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n);

    // Standard normal via the polar method.
    double normal();

    // Exponential with rate 1.
    double exponential();

    // Gamma(shape, 1) via Marsaglia-Tsang, valid for any shape > 0.
    double gamma(double shape);

    // Dirichlet(alpha * 1_k): k gamma draws, normalized.
    std::vector<double> dirichlet(double alpha, std::size_t k);

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent stream for substream `id`. Derivations are pure functions
    // of (seed, id), so work split across streams is order-independent.
    Rng derive(std::uint64_t id) const;

private:
    std::uint64_t state_[4];
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

// Child seed as a pure function of (seed, stream, id); used where an API
// takes a seed rather than a generator.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t id = 0);

// Stream ids used to derive independent generators from one user seed.
// Keeping them in one place documents which stage consumes which stream.
namespace streams {
inline constexpr std::uint64_t kTrainTestSplit = 1;
inline constexpr std::uint64_t kFederationSplit = 2;
inline constexpr std::uint64_t kLocalSplit = 3;
inline constexpr std::uint64_t kTreeQuota = 4;
inline constexpr std::uint64_t kTreeSelection = 5;
inline constexpr std::uint64_t kForestTree = 6;
inline constexpr std::uint64_t kSynthetic = 7;
inline constexpr std::uint64_t kClientFraction = 8;
inline constexpr std::uint64_t kClientForest = 9;
}  // namespace streams

}  // namespace fedsurf
