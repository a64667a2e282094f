#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace gvdoc {

// mt19937_64 raw output is specified by the standard, so results are portable.
// std::uniform_*_distribution is implementation-defined, so all draws below are
// hand-rolled on top of the raw 64-bit stream.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform integer in [0, n). n must be > 0. Multiply-shift; the tiny bias
    // (~n / 2^64) is irrelevant here and the result is platform-stable.
    uint64_t bounded(uint64_t n) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    int range_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(bounded(static_cast<uint64_t>(hi - lo + 1)));
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one value per call, spare cached.
    double normal(double mean = 0.0, double stddev = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct values from [0, n), in draw order.
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> pool(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) pool[static_cast<size_t>(i)] = i;
        std::vector<int> out;
        out.reserve(static_cast<size_t>(k));
        for (int i = 0; i < k && i < n; ++i) {
            size_t j = static_cast<size_t>(i) + static_cast<size_t>(bounded(static_cast<uint64_t>(n - i)));
            std::swap(pool[static_cast<size_t>(i)], pool[j]);
            out.push_back(pool[static_cast<size_t>(i)]);
        }
        return out;
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace gvdoc
