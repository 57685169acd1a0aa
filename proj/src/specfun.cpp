#include "liouconv/specfun.hpp"

#include <array>
#include <cmath>
#include <string>

namespace liouconv {

namespace {

// B_{2k} / (2k (2k-1)) for k = 1..10.
constexpr std::array<double, 10> kStirling = {
    1.0 / 12.0,          -1.0 / 360.0,          1.0 / 1260.0,       -1.0 / 1680.0,
    1.0 / 1188.0,        -691.0 / 360360.0,     1.0 / 156.0,        -3617.0 / 122400.0,
    43867.0 / 244188.0,  -174611.0 / 125400.0,
};

constexpr int kMaxCorrections = 30;
constexpr double kLogSqrtTwoPi = 0.91893853320467274178;

// B_{2k} / (2k)! = (-1)^{k+1} 2 zeta(2k) / (2 pi)^{2k}.
const std::array<double, kMaxCorrections + 1>& bernoulli_factorial_ratios()
{
    static const auto table = [] {
        std::array<double, kMaxCorrections + 1> out{};
        for (int k = 1; k <= kMaxCorrections; ++k) {
            const double p = 2.0 * k;
            double zeta_even;
            if (k == 1) {
                zeta_even = kPi * kPi / 6.0;
            } else {
                const int cut = 200;
                CompensatedSum<double> acc;
                for (int n = cut - 1; n >= 1; --n)
                    acc.add(std::pow(static_cast<double>(n), -p));
                const double c = cut;
                acc.add(std::pow(c, 1.0 - p) / (p - 1.0) + 0.5 * std::pow(c, -p)
                        + p / 12.0 * std::pow(c, -p - 1.0));
                zeta_even = acc.value();
            }
            const double sign = (k % 2 == 1) ? 1.0 : -1.0;
            out[k] = sign * 2.0 * zeta_even * std::exp(-p * std::log(2.0 * kPi));
        }
        return out;
    }();
    return table;
}

void check_zeta_domain(Complex s, const ZetaOptions& opts)
{
    require_finite(s, "zeta argument");
    if (s.real() < 0.4)
        throw DomainError("zeta: Re(s) = " + std::to_string(s.real())
                          + " is outside the supported half-plane Re(s) >= 0.4");
    if (std::abs(s - 1.0) <= 1e-6)
        throw DomainError("zeta: argument within 1e-6 of the pole at s = 1");
    if (opts.correction_terms < 1 || opts.correction_terms > kMaxCorrections)
        throw DomainError("zeta: correction_terms must lie in [1, 30]");
}

ZetaPair euler_maclaurin(Complex s, const ZetaOptions& opts, bool with_derivative)
{
    check_zeta_domain(s, opts);
    const int m = opts.correction_terms;
    // Keep (|s| + 2m) / (2 pi N) <= 1/2 so the dropped correction is ~2^{-2m}.
    const double need = (std::abs(s) + 2.0 * m) / kPi;
    const long n_cut = std::max(10L, static_cast<long>(std::ceil(need)));

    ComplexSum value;
    ComplexSum deriv;
    for (long n = n_cut - 1; n >= 1; --n) {
        const double ln = std::log(static_cast<double>(n));
        const Complex term = std::exp(-s * ln);
        value.add(term);
        if (with_derivative)
            deriv.add(-ln * term);
    }

    const double big_n = static_cast<double>(n_cut);
    const double ln_n = std::log(big_n);
    const Complex n_pow = std::exp(-s * ln_n);  // N^{-s}
    const Complex head = big_n * n_pow / (s - 1.0);
    value.add(head);
    value.add(0.5 * n_pow);
    if (with_derivative) {
        deriv.add(-ln_n * head - head / (s - 1.0));
        deriv.add(-0.5 * ln_n * n_pow);
    }

    const auto& coef = bernoulli_factorial_ratios();
    Complex poch = s;               // s (s+1) ... (s + 2k - 2)
    Complex log_poch_deriv = 1.0 / s;  // sum_j 1/(s + j)
    Complex n_power = n_pow / big_n;  // N^{-s-2k+1}
    for (int k = 1; k <= m; ++k) {
        if (k > 1) {
            const Complex a = s + static_cast<double>(2 * k - 3);
            const Complex b = s + static_cast<double>(2 * k - 2);
            poch *= a * b;
            log_poch_deriv += 1.0 / a + 1.0 / b;
            n_power /= big_n * big_n;
        }
        const Complex term = coef[k] * poch * n_power;
        value.add(term);
        if (with_derivative)
            deriv.add(term * (log_poch_deriv - ln_n));
    }
    return {value.value(), deriv.value()};
}

} // namespace

void require_finite(Complex z, const char* what)
{
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw DomainError(std::string(what) + ": non-finite complex value");
}

Complex log_gamma(Complex z)
{
    require_finite(z, "log_gamma argument");
    if (z.real() <= 0.0)
        throw DomainError("log_gamma: requires Re(z) > 0, got Re(z) = "
                          + std::to_string(z.real()));
    Complex shift_log{0.0, 0.0};
    Complex w = z;
    while (std::abs(w) < 12.0) {
        shift_log += std::log(w);
        w += 1.0;
    }
    const Complex inv = 1.0 / w;
    const Complex inv2 = inv * inv;
    Complex series{0.0, 0.0};
    Complex power = inv;
    for (double c : kStirling) {
        series += c * power;
        power *= inv2;
    }
    return (w - 0.5) * std::log(w) - w + kLogSqrtTwoPi + series - shift_log;
}

Complex log_gamma_ratio(Complex r1, Complex r2, double shift)
{
    return log_gamma(r1) + log_gamma(r2) - log_gamma(r1 + r2 + shift);
}

Complex gamma_ratio(Complex r1, Complex r2, double shift)
{
    return std::exp(log_gamma_ratio(r1, r2, shift));
}

Complex zeta(Complex s, ZetaOptions opts)
{
    return euler_maclaurin(s, opts, false).value;
}

Complex zeta_derivative(Complex s, ZetaOptions opts)
{
    return euler_maclaurin(s, opts, true).derivative;
}

ZetaPair zeta_with_derivative(Complex s, ZetaOptions opts)
{
    return euler_maclaurin(s, opts, true);
}

double zeta_half()
{
    static const double value = zeta(Complex{0.5, 0.0}).real();
    return value;
}

} // namespace liouconv
