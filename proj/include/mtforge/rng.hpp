#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace mtforge {

// splitmix64. Every random choice in the toolkit flows through this so that
// outputs are byte-identical across platforms and standard-library versions;
// std::mt19937 plus std:: distributions would not give that guarantee.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n); n must be > 0. Fixed-point multiply; the residual
    // bias at 64 bits is far below anything our sample sizes can observe.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<__uint128_t>(next()) * n) >> 64);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

// Derives an independent stream from a base seed (stage seeding, per-worker
// streams). Pure function of its inputs.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    Rng rng(seed ^ (stream * 0xA24BAED4963EE407ULL + 0x9FB21C651E98DF25ULL));
    return rng.next();
}

} // namespace mtforge
