#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "liouconv/sieve.hpp"

using namespace liouconv;

namespace {

// Trial-division factorization: Omega(n) and squarefreeness.
struct Factorization {
    int omega = 0;
    bool squarefree = true;
};

Factorization factor(std::uint64_t n)
{
    Factorization f;
    for (std::uint64_t p = 2; p * p <= n; ++p) {
        int e = 0;
        while (n % p == 0) {
            n /= p;
            ++e;
        }
        f.omega += e;
        if (e > 1)
            f.squarefree = false;
    }
    if (n > 1)
        ++f.omega;
    return f;
}

int lambda_oracle(std::uint64_t n)
{
    return factor(n).omega % 2 == 0 ? 1 : -1;
}

int mu_oracle(std::uint64_t n)
{
    const auto f = factor(n);
    if (!f.squarefree)
        return 0;
    return f.omega % 2 == 0 ? 1 : -1;
}

std::filesystem::path temp_path(const char* name)
{
    return std::filesystem::temp_directory_path() / name;
}

} // namespace

TEST_CASE("small tables")
{
    const auto l = build_sieve(Kind::liouville, 4);
    CHECK(l.value(1) == 1);
    CHECK(l.value(2) == -1);
    CHECK(l.value(3) == -1);
    CHECK(l.value(4) == 1);
    const auto m = build_sieve(Kind::moebius, 4);
    CHECK(m.value(1) == 1);
    CHECK(m.value(2) == -1);
    CHECK(m.value(3) == -1);
    CHECK(m.value(4) == 0);
    CHECK(build_sieve(Kind::liouville, 12).value(12) == -1);
}

TEST_CASE("values agree with trial division")
{
    const std::uint64_t n = 20000;
    const auto l = build_sieve(Kind::liouville, n);
    const auto m = build_sieve(Kind::moebius, n);
    for (std::uint64_t k = 1; k <= n; ++k) {
        REQUIRE(l.value(k) == lambda_oracle(k));
        REQUIRE(m.value(k) == mu_oracle(k));
        if (m.value(k) != 0)
            REQUIRE(l.value(k) == m.value(k));
    }
}

TEST_CASE("summatory uses floor semantics")
{
    const auto l = build_sieve(Kind::liouville, 100);
    const auto m = build_sieve(Kind::moebius, 100);
    CHECK(l.summatory(1.0) == 1);
    CHECK(l.summatory(4.0) == 0);
    CHECK(l.summatory(3.999) == -1);
    CHECK(m.summatory(0.5) == 0);
    CHECK(m.summatory(10.0) == -1);
    CHECK_THROWS_AS(l.summatory(100.5), SizingError);
    for (std::uint64_t k = 2; k <= 100; ++k)
        CHECK(l.prefix()[k] - l.prefix()[k - 1] == l.value(k));
}

TEST_CASE("divisor sum of lambda detects squares")
{
    const std::uint64_t n = 5000;
    const auto l = build_sieve(Kind::liouville, n);
    std::vector<int> sum(n + 1, 0);
    for (std::uint64_t d = 1; d <= n; ++d)
        for (std::uint64_t k = d; k <= n; k += d)
            sum[k] += l.value(d);
    for (std::uint64_t k = 1; k <= n; ++k) {
        const auto r = static_cast<std::uint64_t>(std::llround(std::sqrt(static_cast<double>(k))));
        REQUIRE(sum[k] == (r * r == k ? 1 : 0));
    }
}

TEST_CASE("segmented construction matches the linear sieve")
{
    SieveOptions seg;
    seg.method = SieveOptions::Method::segmented;
    seg.segment_size = 1000;
    SieveOptions lin;
    lin.method = SieveOptions::Method::linear;
    for (Kind kind : {Kind::liouville, Kind::moebius}) {
        const auto a = build_sieve(kind, 123457, seg);
        const auto b = build_sieve(kind, 123457, lin);
        CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin(), b.values().end()));
        CHECK(std::equal(a.prefix().begin(), a.prefix().end(), b.prefix().begin(), b.prefix().end()));
    }
}

TEST_CASE("sizing errors")
{
    CHECK_THROWS_AS(build_sieve(Kind::liouville, 0), SizingError);
    SieveOptions tiny;
    tiny.memory_limit = 1000;
    CHECK_THROWS_AS(build_sieve(Kind::liouville, 1000, tiny), SizingError);
}

TEST_CASE("L(x) stays below 3 x^0.6")
{
    const auto l = build_sieve(Kind::liouville, 200000);
    for (std::uint64_t x = 100; x <= 200000; ++x)
        REQUIRE(std::abs(static_cast<double>(l.summatory_at(x))) <= 3.0 * std::pow(static_cast<double>(x), 0.6));
}

TEST_CASE("table file round trip and corruption")
{
    const auto path = temp_path("liouconv_test_table.bin");
    for (Kind kind : {Kind::liouville, Kind::moebius}) {
        const auto t = build_sieve(kind, 4321);
        save_table(t, path);
        const auto back = load_table(path);
        CHECK(back.kind() == kind);
        CHECK(back.limit() == 4321);
        CHECK(std::equal(t.values().begin(), t.values().end(), back.values().begin(), back.values().end()));
    }
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.put('X');
    }
    CHECK_THROWS_AS(load_table(path), FormatError);
    std::filesystem::resize_file(path, 20);
    CHECK_THROWS_AS(load_table(path), FormatError);
    std::filesystem::remove(path);
}

TEST_CASE("kind names")
{
    CHECK(parse_kind("liouville") == Kind::liouville);
    CHECK(parse_kind("mu") == Kind::moebius);
    CHECK(kind_name(Kind::moebius) == "moebius");
    CHECK_THROWS_AS(parse_kind("zeta"), std::invalid_argument);
}
