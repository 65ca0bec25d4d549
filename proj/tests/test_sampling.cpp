#include <doctest.h>

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "recimaging/sampling.hpp"
#include "recimaging/util.hpp"

using namespace recimaging;

namespace {

Eigen::VectorXd random_simplex(int n, std::mt19937_64& rng) {
    Eigen::VectorXd p(n);
    for (int j = 0; j < n; ++j) p[j] = -std::log(1.0 - u01(rng));
    return p / p.sum();
}

} // namespace

TEST_SUITE_BEGIN("sampling");

TEST_CASE("counts always sum to the requested photon number") {
    std::mt19937_64 rng(2026);
    for (std::int64_t S : {std::int64_t(1), std::int64_t(17), std::int64_t(1000),
                           std::int64_t(9999991), std::int64_t(10000000000)}) {
        for (int trial = 0; trial < 5; ++trial) {
            const Eigen::VectorXd p = random_simplex(3 + 7 * trial, rng);
            const CountVector cv = sample_counts(p, S, rng);
            REQUIRE(cv.n_outcomes() == p.size());
            std::int64_t sum = 0;
            for (std::int64_t c : cv.counts) {
                CHECK(c >= 0);
                sum += c;
            }
            CHECK(sum == S);
            CHECK(cv.total == S);
        }
    }
}

TEST_CASE("a ten-billion-photon draw over 100 outcomes is effectively instant") {
    std::mt19937_64 rng(7);
    const Eigen::VectorXd p = random_simplex(100, rng);
    const auto t0 = std::chrono::steady_clock::now();
    const CountVector cv = sample_counts(p, 10000000000LL, rng);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(cv.total == 10000000000LL);
    CHECK(secs < 1.0);
}

TEST_CASE("identical seeds give identical draws, distinct seeds differ") {
    std::mt19937_64 base(3);
    const Eigen::VectorXd p = random_simplex(12, base);
    std::mt19937_64 a(42), b(42), c(43);
    const CountVector ca = sample_counts(p, 100000, a);
    const CountVector cb = sample_counts(p, 100000, b);
    const CountVector cc = sample_counts(p, 100000, c);
    CHECK(ca.counts == cb.counts);
    CHECK(ca.counts != cc.counts);
}

TEST_CASE("empirical probabilities are counts over total") {
    CountVector cv;
    cv.counts = {3, 0, 7};
    cv.total = 10;
    const Eigen::VectorXd f = empirical_probs(cv);
    CHECK(f[0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(f[1] == 0.0);
    CHECK(f[2] == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("draws follow the multinomial law: Pearson X2 across 100 seeds") {
    // Per-seed goodness-of-fit against the exact cell probabilities at
    // S = 1000 over 10 outcomes; df = 9; the 0.001 critical value is
    // 27.877164871257, so 100 independent seeds should essentially never
    // produce more than a couple of exceedances.
    std::mt19937_64 init(11);
    // keep every expected count at 50+ so the asymptotic tail is trustworthy
    Eigen::VectorXd p = random_simplex(10, init);
    p = (p.array() + 1.0).matrix();
    p /= p.sum();
    const std::int64_t S = 1000;
    int exceedances = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(derive_seed(909, seed));
        const CountVector cv = sample_counts(p, S, rng);
        double x2 = 0.0;
        for (int j = 0; j < 10; ++j) {
            const double expected = static_cast<double>(S) * p[j];
            const double diff = static_cast<double>(cv.counts[static_cast<std::size_t>(j)]) - expected;
            x2 += diff * diff / expected;
        }
        if (x2 > 27.877164871257) ++exceedances;
    }
    CHECK(exceedances <= 2);
}

TEST_CASE("small-sample edge cases") {
    std::mt19937_64 rng(5);
    SUBCASE("single outcome takes everything") {
        Eigen::VectorXd p(1);
        p << 1.0;
        const CountVector cv = sample_counts(p, 12345, rng);
        CHECK(cv.counts[0] == 12345);
    }
    SUBCASE("zero-probability outcome never fires") {
        Eigen::VectorXd p(3);
        p << 0.5, 0.0, 0.5;
        const CountVector cv = sample_counts(p, 100000, rng);
        CHECK(cv.counts[1] == 0);
    }
    SUBCASE("S = 0 gives all zeros") {
        Eigen::VectorXd p(4);
        p << 0.25, 0.25, 0.25, 0.25;
        const CountVector cv = sample_counts(p, 0, rng);
        CHECK(cv.total == 0);
        for (std::int64_t c : cv.counts) CHECK(c == 0);
    }
    SUBCASE("negative S throws") {
        Eigen::VectorXd p(2);
        p << 0.5, 0.5;
        CHECK_THROWS(sample_counts(p, -1, rng));
    }
}

TEST_CASE("sanitize_probabilities clips quadrature noise but rejects real negatives") {
    Eigen::VectorXd p(3);
    p << 0.6, -1e-12, 0.4;
    const Eigen::VectorXd q = sanitize_probabilities(p);
    CHECK(q[1] == 0.0);
    CHECK(q.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(q.minCoeff() >= 0.0);

    Eigen::VectorXd bad(3);
    bad << 0.6, -1e-3, 0.4;
    CHECK_THROWS(sanitize_probabilities(bad));
}

TEST_SUITE_END();
