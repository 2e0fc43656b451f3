#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace medood {

// Seeded generator with portable draw algorithms. mt19937_64 output is pinned
// by the standard; std::uniform_*_distribution and std::shuffle are not, so
// every draw here is spelled out to keep seeded runs reproducible across
// toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform integer in [0, bound) via rejection, bound >= 1.
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % bound;
    }

    int next_int(int lo, int hi) {  // inclusive range
        return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Standard normal via Box-Muller (pair cached).
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // n distinct indices from [0, total), uniform without replacement,
    // in shuffled order.
    std::vector<std::size_t> sample_indices(std::size_t total, std::size_t n) {
        std::vector<std::size_t> idx(total);
        for (std::size_t i = 0; i < total; ++i) idx[i] = i;
        shuffle(idx);
        idx.resize(n);
        return idx;
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace medood
