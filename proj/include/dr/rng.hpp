#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace dr {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Deterministic RNG with portable integer/real helpers; the standard
// library distributions differ across implementations, these do not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)) {}

    std::uint64_t next() {
        state_ = splitmix64(state_);
        return state_;
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(
                        (static_cast<unsigned __int128>(next()) * span) >> 64);
    }

    double uniform(double lo, double hi) {
        double u = (next() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }

    bool coin() { return (next() & 1) != 0; }

    template <typename T>
    const T& pick(const std::vector<T>& items) {
        return items[static_cast<std::size_t>(
            uniform_int(0, static_cast<int>(items.size()) - 1))];
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (int i = static_cast<int>(items.size()) - 1; i > 0; --i)
            std::swap(items[static_cast<std::size_t>(i)],
                      items[static_cast<std::size_t>(uniform_int(0, i))]);
    }

private:
    std::uint64_t state_;
};

}  // namespace dr
