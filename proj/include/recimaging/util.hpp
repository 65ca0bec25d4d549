#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace recimaging {

/// Compensated (Kahan) accumulator. D/G assembly averages probabilities that
/// span many orders of magnitude, so plain summation is the accuracy bottleneck.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        double y = x - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// One child seed per work item keeps parallel and sequential runs identical.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 1));
}

/// Uniform double in [0,1) from the top 53 bits; identical on every platform,
/// unlike std::uniform_real_distribution.
inline double u01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(std::mt19937_64& rng, double p) { return u01(rng) < p; }

/// FNV-1a over a string; used to name runs in manifests.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t v);

/// n-point Gauss-Legendre rule on [-1, 1].
struct QuadRule {
    Eigen::VectorXd nodes, weights;
};

QuadRule gauss_legendre(int n);

/// Runs fn(i) for i in [0,n). Honors RECIMAGING_WORKERS (default: hardware
/// concurrency). Each index must be independent; callers derive per-index seeds.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace recimaging
