#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "liouconv/explicit_formula.hpp"

using namespace liouconv;

namespace {

const char* const kFirstTen =
    "14.134725141734693790\n21.022039638771554993\n25.010857580145688763\n"
    "30.424876125859513210\n32.935061587739189691\n37.586178158825671257\n"
    "40.918719012147495187\n43.327073280914999519\n48.005150881167159727\n"
    "49.773832477672302181\n";

const ZeroSet& zeros()
{
    static const ZeroSet zs = [] {
        std::istringstream in(kFirstTen);
        return enrich(load_ordinates(in));
    }();
    return zs;
}

double zh()
{
    return -1.4603545088095868;
}

// All zeros of the window with both signs, coefficients evaluated afresh
// from zeta and zeta' (not from the stored enrichment).
struct Signed {
    Complex rho;
    Complex c;
};

std::vector<Signed> signed_zeros(Kind kind, std::size_t k)
{
    std::vector<Signed> out;
    for (std::size_t i = 0; i < k; ++i) {
        for (int sgn : {1, -1}) {
            const Complex rho{0.5, sgn * zeros()[i].gamma};
            const Complex zp = zeta_derivative(rho);
            const Complex c = kind == Kind::liouville ? zeta(2.0 * rho) / zp : 1.0 / zp;
            out.push_back({rho, c});
        }
    }
    return out;
}

Complex pow_c(double x, Complex z)
{
    return std::exp(z * std::log(x));
}

// Ordered double loop over every signed pair.
Complex cesaro_pairs_oracle(Kind kind, std::size_t k, int d, double x)
{
    const auto zs = signed_zeros(kind, k);
    Complex acc{0.0, 0.0};
    for (const auto& a : zs)
        for (const auto& b : zs)
            acc += a.c * b.c * gamma_ratio(a.rho, b.rho, d) * pow_c(x, a.rho + b.rho + static_cast<double>(d) - 1.0);
    return acc;
}

ExplicitOptions unpruned()
{
    ExplicitOptions o;
    o.prune_relative = 0.0;
    return o;
}

} // namespace

TEST_CASE("summatory formula below the first zero")
{
    const auto l = explicit_summatory(Kind::liouville, 1.0, zeros(), 10.0);
    CHECK(l.total.real() == doctest::Approx(1.0 / zh()).epsilon(1e-12));
    CHECK(l.total.real() == doctest::Approx(-0.68477).epsilon(1e-5));
    CHECK(l.zeros_used == 0);
    CHECK(l.single_sum == Complex{0.0, 0.0});
    const auto m = explicit_summatory(Kind::moebius, 123.4, zeros(), 10.0);
    CHECK(m.total == Complex{0.0, 0.0});
    CHECK_THROWS_AS(explicit_summatory(Kind::liouville, 5.0, zeros(), 60.0), std::invalid_argument);
}

TEST_CASE("summatory single sum against a direct zero loop")
{
    const double x = 137.5;
    for (Kind kind : {Kind::liouville, Kind::moebius}) {
        const auto b = explicit_summatory(kind, x, zeros(), zeros().t_max());
        Complex oracle{0.0, 0.0};
        for (const auto& z : signed_zeros(kind, 10))
            oracle += z.c * pow_c(x, z.rho) / z.rho;
        CHECK(std::abs(b.single_sum - oracle) < 1e-12 * (1.0 + std::abs(oracle)));
        CHECK(b.imag_residue < 1e-8 * (1.0 + std::abs(b.total)));
        CHECK(b.envelope == doctest::Approx(1.0 + x * (std::log(x) + 1.0) / zeros().t_max()));
    }
}

TEST_CASE("cesaro main term")
{
    const double x = 50.0;
    const auto b = explicit_cesaro(Kind::liouville, x, zeros(), 10.0);
    CHECK(b.total.real() == doctest::Approx(x * x * kPi / (8.0 * zh() * zh())).epsilon(1e-12));
    CHECK(b.total.real() / (x * x) == doctest::Approx(0.18414).epsilon(1e-4));
    CHECK(explicit_cesaro(Kind::moebius, x, zeros(), 10.0).total == Complex{0.0, 0.0});
    const auto b3 = explicit_cesaro(Kind::liouville, x, zeros(), 10.0, 3);
    CHECK(b3.main_term.real() == doctest::Approx(std::pow(x, 3) * kPi / (24.0 * zh() * zh())).epsilon(1e-12));
}

TEST_CASE("cesaro terms against direct sums over signed zeros")
{
    for (int d : {2, 3}) {
        for (double x : {20.0, 1000.0}) {
            const auto b = explicit_cesaro(Kind::liouville, x, zeros(), zeros().t_max(), d, unpruned());
            Complex single{0.0, 0.0};
            for (const auto& z : signed_zeros(Kind::liouville, 10))
                single += std::sqrt(kPi) / zh() * z.c * std::exp(log_gamma(z.rho) - log_gamma(z.rho + (d + 0.5)))
                          * pow_c(x, z.rho + (d - 0.5));
            CHECK(std::abs(b.single_sum - single) < 1e-11 * (1.0 + std::abs(single)));
            const Complex pairs = cesaro_pairs_oracle(Kind::liouville, 10, d, x);
            CHECK(std::abs(b.double_sum - pairs) < 1e-11 * (1.0 + std::abs(pairs)));
            CHECK(b.imag_residue < 1e-8 * (1.0 + std::abs(b.total)));
        }
    }
    const auto m = explicit_cesaro(Kind::moebius, 300.0, zeros(), zeros().t_max(), 2, unpruned());
    const Complex pairs = cesaro_pairs_oracle(Kind::moebius, 10, 2, 300.0);
    CHECK(std::abs(m.double_sum - pairs) < 1e-11 * (1.0 + std::abs(pairs)));
}

TEST_CASE("pruning only drops negligible mixed pairs")
{
    const double x = 1e4;
    const auto pruned = explicit_cesaro(Kind::liouville, x, zeros(), zeros().t_max());
    const auto full = explicit_cesaro(Kind::liouville, x, zeros(), zeros().t_max(), 2, unpruned());
    CHECK(pruned.pruned_terms > 0);
    CHECK(full.pruned_terms == 0);
    CHECK(pruned.pair_terms + pruned.pruned_terms == full.pair_terms);
    CHECK(std::abs(pruned.double_sum - full.double_sum) < 1e-15 * x * x);
}

TEST_CASE("moebius d-fold needs the extrapolated flag")
{
    CHECK_THROWS_AS(explicit_cesaro(Kind::moebius, 10.0, zeros(), 30.0, 3), std::invalid_argument);
    CHECK_NOTHROW(explicit_cesaro(Kind::moebius, 10.0, zeros(), 30.0, 3, {}, true));
    CHECK_THROWS_AS(explicit_cesaro(Kind::liouville, 10.0, zeros(), 30.0, 1), std::invalid_argument);
}

TEST_CASE("worker count does not change any bit")
{
    const CesaroExplicit one(Kind::liouville, 2, zeros(), zeros().t_max(), ExplicitOptions{1, 1e-18});
    for (unsigned w : {2u, 4u, 8u}) {
        const CesaroExplicit many(Kind::liouville, 2, zeros(), zeros().t_max(), ExplicitOptions{w, 1e-18});
        for (double x : {10.0, 1e3, 1e6}) {
            const auto a = one(x);
            const auto b = many(x);
            CHECK(a.total == b.total);
            CHECK(a.single_sum == b.single_sum);
            CHECK(a.double_sum == b.double_sum);
        }
    }
}

TEST_CASE("dirichlet series")
{
    const auto t = build_sieve(Kind::liouville, 20000);
    const auto s = convolve(t, 2, 20000);
    CHECK(dirichlet_direct(s, 2.0, 2).real() == doctest::Approx(0.25));
    CHECK(dirichlet_direct(s, 2.0, 3).real() == doctest::Approx(0.25 - 2.0 / 9.0));
    CHECK(std::abs(dirichlet_direct(s, 6.0, 10000) - dirichlet_direct(s, 6.0, 20000)) < 1e-12);
    CHECK_THROWS_AS(dirichlet_direct(s, 2.0, 20001), SizingError);

    const auto main_only = dirichlet_explicit(Kind::liouville, 3.0, zeros(), 10.0);
    CHECK(main_only.total.real() == doctest::Approx(-3.0 * kPi / (4.0 * zh() * zh())).epsilon(1e-12));
    CHECK(main_only.total.real() == doctest::Approx(-1.1049).epsilon(1e-4));
    CHECK(dirichlet_explicit(Kind::moebius, 3.0, zeros(), 10.0).total == Complex{0.0, 0.0});
    CHECK_THROWS_AS(dirichlet_explicit(Kind::liouville, Complex{1.0, 0.0}, zeros(), 10.0), DomainError);
    CHECK_THROWS_AS(dirichlet_explicit(Kind::liouville, Complex{0.9, 3.0}, zeros(), 10.0), DomainError);
}

TEST_CASE("dirichlet zero terms against the displayed sums")
{
    const Complex sv{2.5, 1.5};
    const auto b = dirichlet_explicit(Kind::liouville, sv, zeros(), zeros().t_max(), unpruned());
    const auto zs = signed_zeros(Kind::liouville, 10);
    Complex single{0.0, 0.0};
    Complex pairs{0.0, 0.0};
    for (const auto& z : zs)
        single += z.c * std::exp(log_gamma(z.rho) - log_gamma(z.rho + 2.5)) / (z.rho - sv + 0.5);
    single *= std::sqrt(kPi) * sv * (sv + 1.0) / zh();
    for (const auto& p : zs)
        for (const auto& q : zs)
            pairs += p.c * q.c * gamma_ratio(p.rho, q.rho, 2.0) / (p.rho + q.rho - sv);
    pairs *= sv * (sv + 1.0);
    CHECK(std::abs(b.single_sum - single) < 1e-12 * (1.0 + std::abs(single)));
    CHECK(std::abs(b.double_sum - pairs) < 1e-12 * (1.0 + std::abs(pairs)));
    const Complex main = sv * (sv + 1.0) * kPi / (8.0 * zh() * zh() * (1.0 - sv));
    CHECK(std::abs(b.main_term - main) < 1e-13);
    CHECK(b.envelope == doctest::Approx(std::abs(sv * (sv + 1.0)) / (2.5 - 0.6)));

    const auto r = dirichlet_explicit(Kind::liouville, 2.5, zeros(), zeros().truncation_for_count(10));
    CHECK(std::isfinite(std::abs(r.total)));
    CHECK(std::abs(r.double_sum) < std::abs(r.single_sum));
}

TEST_CASE("exponential weights")
{
    const auto t = build_sieve(Kind::liouville, 100);
    const auto s = convolve(t, 2, 100);
    CHECK_THROWS_AS(exponential_direct(s, 1.0, 3), SizingError);
    double oracle = 0.0;
    for (std::uint64_t n = 2; n <= 40; ++n)
        oracle += static_cast<double>(s[n]) * std::exp(-static_cast<double>(n));
    CHECK(exponential_direct(s, 1.0, 40) == doctest::Approx(oracle).epsilon(1e-14));
    CHECK(exponential_direct(s, 1.0, 20) == doctest::Approx(std::exp(-2.0) - 2.0 * std::exp(-3.0)).epsilon(1e-2));

    const auto main_only = exponential_explicit(Kind::liouville, 0.01, zeros(), 10.0);
    CHECK(main_only.total.real() == doctest::Approx(100.0 * kPi / (4.0 * zh() * zh())).epsilon(1e-12));
    CHECK(main_only.total.real() == doctest::Approx(36.827).epsilon(1e-4));
    CHECK(exponential_explicit(Kind::moebius, 1.0, zeros(), 10.0).total == Complex{0.0, 0.0});

    for (double y : {0.05, 0.5}) {
        const auto b = exponential_explicit(Kind::liouville, y, zeros(), zeros().t_max());
        Complex f{0.0, 0.0};
        for (const auto& z : signed_zeros(Kind::liouville, 10))
            f += z.c * std::exp(log_gamma(z.rho) - z.rho * std::log(y));
        CHECK(std::abs(b.double_sum - f * f) < 1e-12 * (1.0 + std::abs(f * f)));
        const Complex g = exponential_factor(Kind::liouville, y, zeros(), zeros().t_max());
        CHECK(std::abs(b.double_sum - g * g) < 1e-12 * (1.0 + std::abs(g * g)));
        CHECK(b.envelope == doctest::Approx(std::pow(y, -0.6) + 1.0));
    }
}

TEST_CASE("weighted direct sums")
{
    const auto t = build_sieve(Kind::liouville, 200);
    const auto w = polynomial_weight(0.3, 3.0, 1.0, 2);
    CHECK(weighted_average_direct(w, t, 2).real() == doctest::Approx(1.0));
    const auto none = polynomial_weight(0.0, 2.0, 1.0, 2);
    CHECK(weighted_average_direct(none, t, 2) == Complex{0.0, 0.0});

    // triple loop with the first factor restricted to n1 > eta a
    const auto w3 = polynomial_weight(0.4, 9.5, 2.5, 3);
    double oracle = 0.0;
    for (std::uint64_t a = 1; a < 30; ++a)
        for (std::uint64_t b = 1; b < 30; ++b)
            for (std::uint64_t c = 1; c < 30; ++c) {
                if (static_cast<double>(a) <= 2.5 * 0.4)
                    continue;
                const double u = static_cast<double>(a + b + c) / 2.5;
                if (u < 0.4 || u >= 9.5)
                    continue;
                oracle += t.value(a) * t.value(b) * t.value(c) * std::pow(9.5 - u, 3);
            }
    CHECK(weighted_average_direct(w3, t, 3).real() == doctest::Approx(oracle).epsilon(1e-13));
}

TEST_CASE("weighted identity holds exactly")
{
    const auto l = build_sieve(Kind::liouville, 2000);
    const auto m = build_sieve(Kind::moebius, 2000);
    SUBCASE("documented configurations")
    {
        const auto w = polynomial_weight(0.3, 30.0, 1.0, 2);
        const auto id = weighted_identity_rhs(w, l, 2);
        CHECK(id.boundary == Complex{0.0, 0.0});
        CHECK(std::abs(id.total - weighted_average_direct(w, l, 2)) < 1e-8 * std::abs(id.total));
        const auto w2 = polynomial_weight(3.0, 30.0, 1.0, 2);
        const auto id2 = weighted_identity_rhs(w2, l, 2);
        CHECK(std::abs(id2.boundary) > 0.0);
        CHECK(std::abs(id2.total - weighted_average_direct(w2, l, 2)) < 1e-8 * std::abs(id2.total));
    }
    SUBCASE("random configurations")
    {
        std::mt19937_64 rng(2024);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 24; ++i) {
            const auto& t = i % 2 == 0 ? l : m;
            const int d = 2 + (i / 2) % 2;
            const double eta = 1.0 + 15.0 * u(rng);
            const double a = i % 4 < 2 ? 0.9 * u(rng) / eta : (1.0 + 5.0 * u(rng)) / eta;
            const double b = a + (10.0 + 300.0 * u(rng)) / eta;
            const auto w = polynomial_weight(a, b, eta, 2 + i % 3);
            const Complex direct = weighted_average_direct(w, t, d);
            const auto id = weighted_identity_rhs(w, t, d);
            CHECK(std::abs(direct - id.total) <= 1e-8 * std::max(1.0, std::abs(direct)));
        }
    }
}

TEST_CASE("weighted explicit formula: closed moments, numeric moments and quadrature agree")
{
    const double eta = 500.0;
    const auto w = polynomial_weight(0.001, 1.7, eta, 3);
    const auto closed = weighted_explicit(Kind::liouville, w, zeros(), zeros().t_max(), 2);

    auto numeric_w = w;
    numeric_w.log_moment = nullptr;
    numeric_w.abs_moment = nullptr;
    const auto numeric = weighted_explicit(Kind::liouville, numeric_w, zeros(), zeros().t_max(), 2);
    CHECK(std::abs(closed.total - numeric.total) < 1e-8 * std::abs(closed.total));

    // (1/eta) int f''(w) X(eta w) dw by quadrature of the pointwise formula
    const CesaroExplicit ce(Kind::liouville, 2, zeros(), zeros().t_max());
    const Complex quad = gauss_legendre().integrate(
                             [&](double v) { return w.f_second(v) * ce(eta * v).total; }, 0.001, 1.7, 4000)
                         / eta;
    CHECK(std::abs(closed.total - quad) < 1e-9 * std::abs(quad));
    CHECK(closed.extra_term == Complex{0.0, 0.0});
    CHECK(closed.imag_residue < 1e-8 * (1.0 + std::abs(closed.total)));
}

TEST_CASE("weighted explicit formula extra term")
{
    const auto t = build_sieve(Kind::liouville, 1000);
    const auto w = polynomial_weight(3.0, 30.0, 1.0, 2);
    CHECK(w.extra_term_active());
    CHECK_THROWS_AS(weighted_explicit(Kind::liouville, w, zeros(), 30.0, 2), std::invalid_argument);
    CHECK_THROWS_AS(weighted_explicit(Kind::liouville, w, zeros(), 30.0, 3, &t), std::invalid_argument);
    const auto b = weighted_explicit(Kind::liouville, w, zeros(), 30.0, 2, &t);
    const auto id = weighted_identity_rhs(w, t, 2);
    CHECK(std::abs(b.extra_term - id.boundary) < 1e-12 * std::abs(id.boundary));
    CHECK(b.total == b.main_term + b.single_sum + b.double_sum);
}

TEST_CASE("exponential and power weights")
{
    // With eta = 1 the exponential weight turns the d = 2 expansion into the
    // exponential formula term by term.
    const auto we = exponential_weight(1.0, 0.05);
    const auto b = weighted_explicit(Kind::liouville, we, zeros(), zeros().t_max(), 2);
    const auto e = exponential_explicit(Kind::liouville, 0.05, zeros(), zeros().t_max());
    CHECK(std::abs(b.main_term - e.main_term) < 1e-10 * std::abs(e.main_term));
    CHECK(std::abs(b.single_sum - e.single_sum) < 1e-10 * (1.0 + std::abs(e.single_sum)));

    CHECK_THROWS_AS(power_weight(1.0, Complex{0.8, 0.0}), DomainError);
    const auto wp = power_weight(1.0, Complex{3.0, 1.0});
    CHECK_FALSE(wp.real_valued);
    CHECK(wp.log_moment(Complex{2.0, 0.0}).real() == doctest::Approx(std::log(std::abs(Complex{3.0, 1.0} * Complex{4.0, 1.0}) / std::abs(Complex{2.0, 1.0}))));
}

TEST_CASE("double series diagnostic")
{
    const auto empty = double_series_diagnostic(zeros(), 1.0, Kind::moebius, 0);
    for (const auto& p : empty)
        CHECK(p.absolute_sum == 0.0);
    CHECK_THROWS_AS(double_series_diagnostic(zeros(), 1.0, Kind::moebius, 11), std::invalid_argument);

    const auto one = double_series_diagnostic(zeros(), 1.0, Kind::moebius, 8);
    const Complex rho = zeros()[0].rho();
    const double inv2 = 1.0 / std::norm(zeros()[0].zprime);
    const double g = zeros()[0].gamma;
    const double mixed = kPi / (2.0 * std::cosh(kPi * g)) * inv2;
    const double same = std::abs(gamma_ratio(rho, rho, 2.0)) * inv2;
    REQUIRE(one[0].zeros == 1);
    CHECK(one[0].absolute_sum == doctest::Approx(2.0 * (mixed + same)).epsilon(1e-12));

    // brute force over all ordered signed pairs of the first 8 zeros
    const auto zs = signed_zeros(Kind::liouville, 8);
    double brute = 0.0;
    for (const auto& a : zs)
        for (const auto& b : zs)
            brute += std::abs(a.c * b.c * gamma_ratio(a.rho, b.rho, 2.0));
    const auto eight = double_series_diagnostic(zeros(), 1.0, Kind::liouville, 8);
    CHECK(eight[3].zeros == 8);
    CHECK(eight[3].absolute_sum == doctest::Approx(brute).epsilon(1e-11));
    CHECK(eight[0].absolute_sum <= eight[1].absolute_sum);
    CHECK(eight[1].absolute_sum <= eight[2].absolute_sum);
    CHECK(eight[2].absolute_sum <= eight[3].absolute_sum);
}
