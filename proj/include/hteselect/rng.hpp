#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <string_view>
#include <vector>

namespace hteselect {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

// Deterministic random stream. All distribution transforms are implemented
// here so that output sequences do not depend on the standard library's
// distribution internals; reruns are bit-identical on any platform.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform on [0, 1)
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    double normal(double mean = 0.0, double sd = 1.0) {
        // Box-Muller, one variate per call
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
        return mean + sd * z;
    }

    // uniform integer in [0, bound)
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = bound * (UINT64_MAX / bound);
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return r % bound;
    }

    void shuffle(std::vector<int>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // first k entries of a random permutation of {0, ..., n-1}
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> idx(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
        for (int i = 0; i < k; ++i) {
            int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
        idx.resize(static_cast<std::size_t>(k));
        return idx;
    }

private:
    std::mt19937_64 eng_;
};

// Value-type seed with pure tag-based derivation. Children are independent
// of the order in which siblings are derived, which keeps parallel code
// reproducible.
class Seed {
public:
    explicit Seed(std::uint64_t v) : state_(detail::splitmix64(v)) {}

    Seed child(std::string_view tag) const { return mixed(detail::fnv1a(tag)); }
    Seed child(std::uint64_t v) const { return mixed(v); }
    Seed child(int v) const { return mixed(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }
    Seed child(double v) const {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        return mixed(bits);
    }

    template <typename T, typename U, typename... Rest>
    Seed child(T first, U second, Rest... rest) const {
        return child(first).child(second, rest...);
    }

    std::uint64_t value() const { return state_; }
    RngStream stream() const { return RngStream(state_); }

private:
    Seed mixed(std::uint64_t v) const {
        Seed s = *this;
        s.state_ = detail::splitmix64(state_ ^ detail::splitmix64(v));
        return s;
    }

    std::uint64_t state_;
};

}  // namespace hteselect
