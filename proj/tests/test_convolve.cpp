#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "liouconv/convolve.hpp"

using namespace liouconv;

namespace {

// Enumerates every composition n = m_1 + ... + m_d directly.
std::int64_t composition_oracle(const SieveTable& t, int d, std::uint64_t n)
{
    if (d == 1)
        return n >= 1 && n <= t.limit() ? t.value(n) : 0;
    std::int64_t sum = 0;
    for (std::uint64_t m = 1; m + static_cast<std::uint64_t>(d - 1) <= n; ++m)
        sum += t.value(m) * composition_oracle(t, d - 1, n - m);
    return sum;
}

// Oracle for the Laplace convolution: the integrand
// L(y) L(x - y) is piecewise constant, so sum constant * length over the
// sorted breakpoint set.
double laplace_oracle(const SieveTable& t, double x)
{
    std::vector<double> cuts = {0.0, x};
    for (double k = 1.0; k < x; k += 1.0) {
        cuts.push_back(k);
        cuts.push_back(x - k);
    }
    std::sort(cuts.begin(), cuts.end());
    long double acc = 0.0L;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i];
        const double hi = cuts[i + 1];
        if (hi <= lo)
            continue;
        const double mid = 0.5 * (lo + hi);
        acc += static_cast<long double>(t.summatory(mid)) * t.summatory(x - mid) * (hi - lo);
    }
    return static_cast<double>(acc);
}

} // namespace

TEST_CASE("first values of S and S*")
{
    const auto l = build_sieve(Kind::liouville, 10);
    const auto s = convolve_naive(l, 2, 10);
    CHECK(s[0] == 0);
    CHECK(s[1] == 0);
    CHECK(s[2] == 1);
    CHECK(s[3] == -2);
    CHECK(s[4] == -1);
    const auto m = build_sieve(Kind::moebius, 10);
    CHECK(convolve_naive(m, 2, 10)[2] == 1);
    CHECK(convolve_fft(l, 2, 2)[2] == 1);
}

TEST_CASE("naive convolution matches composition enumeration")
{
    for (Kind kind : {Kind::liouville, Kind::moebius}) {
        const auto t = build_sieve(kind, 40);
        for (int d = 2; d <= 4; ++d) {
            const auto s = convolve_naive(t, d, 40);
            for (std::uint64_t n = 0; n <= 40; ++n)
                REQUIRE(s[n] == composition_oracle(t, d, n));
        }
    }
}

TEST_CASE("fft, naive and blocked agree")
{
    for (Kind kind : {Kind::liouville, Kind::moebius}) {
        const auto t = build_sieve(kind, 2048);
        for (int d = 2; d <= 4; ++d) {
            const auto naive = convolve_naive(t, d, 2048);
            CHECK(convolve_fft(t, d, 2048) == naive);
            CHECK(convolve_exact_blocked(t, d, 2048) == naive);
            CHECK(convolve(t, d, 2048) == naive);
        }
    }
}

TEST_CASE("S_d vanishes below d and S obeys |S(n)| <= n - 1")
{
    const auto t = build_sieve(Kind::liouville, 3000);
    for (int d = 2; d <= 4; ++d) {
        const auto s = convolve(t, d, 3000);
        for (std::uint64_t n = 0; n < static_cast<std::uint64_t>(d); ++n)
            CHECK(s[n] == 0);
    }
    const auto s = convolve(t, 2, 3000);
    for (std::uint64_t n = 2; n <= 3000; ++n)
        REQUIRE(std::llabs(s[n]) <= static_cast<long long>(n) - 1);
}

TEST_CASE("fft sizing and guard")
{
    CHECK(fft_size(2, 4096) == 8192);
    CHECK(fft_size(3, 4096) == 16384);
    CHECK(fft_rounding_bound(2, 4096) < 0.25);
    const auto t = build_sieve(Kind::liouville, 100);
    CHECK_THROWS_AS(convolve_naive(t, 2, 101), SizingError);
}

TEST_CASE("cesaro sums")
{
    const auto t = build_sieve(Kind::liouville, 100);
    const auto s = convolve(t, 2, 100);
    CHECK(cesaro_sum(s, 3.0) == doctest::Approx(1.0));
    CHECK(cesaro_sum(s, 2.5) == doctest::Approx(0.5));
    CHECK(cesaro_sum(s, 1.5) == 0.0);
    CHECK(std::abs(cesaro_sum(s, 50.3 + 1e-6) - cesaro_sum(s, 50.3)) < 1e-3);
    CHECK_THROWS(cesaro_sum(s, 100.5));
}

TEST_CASE("laplace convolution examples")
{
    const auto t = build_sieve(Kind::liouville, 100);
    CHECK(laplace_convolution_exact(t, 3.0) == doctest::Approx(1.0));
    CHECK(laplace_convolution_exact(t, 1.5) == doctest::Approx(0.0));
    CHECK(laplace_convolution_exact(t, 4.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("laplace convolution matches breakpoint oracle and cesaro sum")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(0.0, 800.0);
    for (Kind kind : {Kind::liouville, Kind::moebius}) {
        const auto t = build_sieve(kind, 1000);
        const auto s2 = convolve(t, 2, 1000);
        const auto s3 = convolve(t, 3, 1000);
        const LaplaceConvolver c3(t, 3, 1000.0);
        for (int i = 0; i < 20; ++i) {
            const double x = dist(rng);
            const double tol = 1e-9 * (1.0 + x * x);
            const double exact = laplace_convolution_exact(t, x);
            CHECK(std::abs(exact - laplace_oracle(t, x)) <= tol);
            CHECK(std::abs(exact - cesaro_sum(s2, x)) <= tol);
            CHECK(std::abs(c3(x) - cesaro_sum(s3, x)) <= tol);
        }
    }
}

TEST_CASE("series csv")
{
    const auto t = build_sieve(Kind::liouville, 5);
    std::ostringstream out;
    write_series_csv(convolve(t, 2, 5), out);
    CHECK(out.str() == "n,value\n2,1\n3,-2\n4,-1\n5,4\n");
}
