#include "liouconv/convolve.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <mutex>
#include <string>

#include "liouconv/numeric.hpp"

namespace liouconv {

namespace {

constexpr double kGuardConstant = 8.0;
constexpr double kGuardLimit = 0.25;
constexpr double kMaxLaplacePolyLimit = 1e5;

void check_request(const SieveTable& table, int d, std::uint64_t n)
{
    if (d < 2)
        throw std::invalid_argument("convolution needs d >= 2, got " + std::to_string(d));
    if (n == 0)
        throw SizingError("convolution needs N >= 1");
    if (n > table.limit())
        throw SizingError("convolution limit " + std::to_string(n) + " exceeds table limit "
                          + std::to_string(table.limit()));
}

// C(n, k) as a double (only used for magnitude bounds).
double binomial(double n, int k)
{
    if (k < 0 || n < k)
        return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i)
        r *= (n - k + i) / i;
    return r;
}

void check_int64_range(int d, std::uint64_t n)
{
    if (binomial(static_cast<double>(n) - 1.0, d - 1) > 4.0e18)
        throw SizingError("S_d(n) for d = " + std::to_string(d) + ", N = " + std::to_string(n)
                          + " may exceed 64-bit range (bound C(N-1, d-1))");
}

double guard_for(std::uint64_t m, double max_abs)
{
    const double eps = std::numeric_limits<double>::epsilon();
    const double md = static_cast<double>(m);
    return eps * kGuardConstant * md * std::log2(md) * max_abs;
}

// FFTW's planner is not re-entrant.
std::mutex& planner_lock()
{
    static std::mutex lock;
    return lock;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
struct PlanFree {
    void operator()(fftw_plan_s* p) const
    {
        std::lock_guard guard(planner_lock());
        fftw_destroy_plan(p);
    }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using SpectrumBuffer = std::unique_ptr<fftw_complex[], FftwFree>;
using Plan = std::unique_ptr<fftw_plan_s, PlanFree>;

// Real <-> half-complex transform pair of fixed size.
class RealFft {
public:
    explicit RealFft(std::uint64_t m)
        : m_(m),
          real_(fftw_alloc_real(m)),
          spec_(fftw_alloc_complex(m / 2 + 1))
    {
        std::lock_guard guard(planner_lock());
        const int size = static_cast<int>(m);
        forward_.reset(fftw_plan_dft_r2c_1d(size, real_.get(), spec_.get(), FFTW_ESTIMATE));
        inverse_.reset(fftw_plan_dft_c2r_1d(size, spec_.get(), real_.get(), FFTW_ESTIMATE));
    }

    std::uint64_t size() const { return m_; }
    std::span<double> real() { return {real_.get(), m_}; }
    std::span<fftw_complex> spectrum() { return {spec_.get(), m_ / 2 + 1}; }
    void forward() { fftw_execute(forward_.get()); }
    void inverse() { fftw_execute(inverse_.get()); }

private:
    std::uint64_t m_;
    RealBuffer real_;
    SpectrumBuffer spec_;
    Plan forward_;
    Plan inverse_;
};

// Bound from the transformed data: forward and inverse transforms each add
// c*eps*log2(M) relative error in the 2-norm and the pointwise d-th power
// amplifies input error by d*max|X|^{d-1}.
double spectral_rounding_bound(int d, std::uint64_t m, double peak, double norm2)
{
    const double eps = std::numeric_limits<double>::epsilon();
    const double log_m = std::log2(static_cast<double>(m));
    return eps * std::pow(peak, d - 1) * norm2 * (2.0 * kGuardConstant * log_m + d) * d;
}

std::uint64_t next_pow2(std::uint64_t x)
{
    return std::bit_ceil(std::max<std::uint64_t>(x, 2));
}

// Rounds fft.real()[k] / m for k <= n, rejecting any value farther than the
// guard limit from an integer.
template <typename Sink>
void round_certified(RealFft& fft, std::uint64_t n, Sink&& sink)
{
    const double scale = 1.0 / static_cast<double>(fft.size());
    auto out = fft.real();
    for (std::uint64_t k = 0; k <= n; ++k) {
        const double v = out[k] * scale;
        const double r = std::nearbyint(v);
        if (std::abs(v - r) >= kGuardLimit)
            throw PrecisionGuardError("FFT output at n = " + std::to_string(k)
                                      + " is not within 0.25 of an integer; use the exact "
                                        "blocked convolution");
        sink(k, r);
    }
}

std::vector<std::int64_t> exact_pair(std::span<const std::int64_t> wide,
                                     std::span<const std::int8_t> small, std::uint64_t n)
{
    const std::uint64_t m = next_pow2(2 * (n + 1));
    RealFft fft(m);

    // Spectrum of the +-1 sequence, kept for every digit plane.
    std::fill(fft.real().begin(), fft.real().end(), 0.0);
    for (std::uint64_t k = 1; k <= n; ++k)
        fft.real()[k] = small[k];
    fft.forward();
    std::vector<Complex> small_spec;
    for (const auto& z : fft.spectrum())
        small_spec.emplace_back(z[0], z[1]);

    const double per_unit = guard_for(m, static_cast<double>(n));
    const double max_digit = std::floor(kGuardLimit / per_unit * (1.0 - 1e-12));
    if (max_digit < 1.0)
        throw PrecisionGuardError("N = " + std::to_string(n)
                                  + " is too large for certified digit-plane convolution");
    const int digit_bits = std::min(30, static_cast<int>(std::floor(std::log2(max_digit + 1.0))));
    const std::uint64_t mask = (std::uint64_t{1} << digit_bits) - 1;

    std::vector<__int128> acc(n + 1, 0);
    for (int sign : {+1, -1}) {
        std::uint64_t largest = 0;
        for (std::uint64_t k = 0; k <= n; ++k) {
            const std::int64_t v = wide[k] * sign;
            if (v > 0)
                largest = std::max<std::uint64_t>(largest, static_cast<std::uint64_t>(v));
        }
        const int planes = (std::bit_width(largest) + digit_bits - 1) / digit_bits;
        for (int p = 0; p < planes; ++p) {
            const int shift = p * digit_bits;
            auto in = fft.real();
            std::fill(in.begin(), in.end(), 0.0);
            for (std::uint64_t k = 0; k <= n; ++k) {
                const std::int64_t v = wide[k] * sign;
                if (v > 0)
                    in[k] = static_cast<double>((static_cast<std::uint64_t>(v) >> shift) & mask);
            }
            fft.forward();
            auto spec = fft.spectrum();
            for (std::size_t i = 0; i < spec.size(); ++i) {
                const Complex z = Complex{spec[i][0], spec[i][1]} * small_spec[i];
                spec[i][0] = z.real();
                spec[i][1] = z.imag();
            }
            fft.inverse();
            round_certified(fft, n, [&](std::uint64_t k, double r) {
                acc[k] += static_cast<__int128>(sign) * (static_cast<__int128>(r) << shift);
            });
        }
    }
    std::vector<std::int64_t> out(n + 1, 0);
    for (std::uint64_t k = 0; k <= n; ++k) {
        if (acc[k] > std::numeric_limits<std::int64_t>::max()
            || acc[k] < std::numeric_limits<std::int64_t>::min())
            throw SizingError("convolution value overflows 64 bits at n = " + std::to_string(k));
        out[k] = static_cast<std::int64_t>(acc[k]);
    }
    return out;
}

} // namespace

ConvolutionSeries::ConvolutionSeries(Kind kind, int d, std::vector<std::int64_t> values)
    : kind_(kind), d_(d), limit_(values.empty() ? 0 : values.size() - 1), values_(std::move(values))
{
    if (d_ < 2)
        throw std::invalid_argument("ConvolutionSeries needs d >= 2");
    if (values_.empty())
        throw SizingError("ConvolutionSeries needs at least one value");
    for (std::uint64_t k = 0; k < std::min<std::uint64_t>(d_, values_.size()); ++k)
        if (values_[k] != 0)
            throw std::invalid_argument("S_d(n) must vanish for n < d");
}

ConvolutionSeries convolve_naive(const SieveTable& table, int d, std::uint64_t n)
{
    check_request(table, d, n);
    check_int64_range(d, n);
    const auto v = table.values();

    std::vector<std::int64_t> cur(n + 1, 0);
    if (d == 2) {
        // S(k) = sum_m v[m] v[k-m], with the second factor read from a reversed copy
        // so both operands stream forward.
        std::vector<std::int8_t> rev(n + 1, 0);
        for (std::uint64_t i = 0; i <= n; ++i)
            rev[i] = v[n - i];
        for (std::uint64_t k = 2; k <= n; ++k) {
            const std::int8_t* a = v.data() + 1;
            const std::int8_t* b = rev.data() + (n - k + 1);
            std::int64_t total = 0;
            const std::uint64_t len = k - 1;
            for (std::uint64_t base = 0; base < len; base += 1u << 20) {
                const std::uint64_t end = std::min(len, base + (1u << 20));
                std::int32_t part = 0;
                for (std::uint64_t i = base; i < end; ++i)
                    part += static_cast<std::int32_t>(a[i]) * static_cast<std::int32_t>(b[i]);
                total += part;
            }
            cur[k] = total;
        }
        return ConvolutionSeries(table.kind(), d, std::move(cur));
    }

    for (std::uint64_t k = 1; k <= n; ++k)
        cur[k] = v[k];
    for (int step = 2; step <= d; ++step) {
        std::vector<std::int64_t> rev(n + 1, 0);
        for (std::uint64_t i = 0; i <= n; ++i)
            rev[i] = cur[n - i];
        std::vector<std::int64_t> next(n + 1, 0);
        for (std::uint64_t k = static_cast<std::uint64_t>(step); k <= n; ++k) {
            const std::int8_t* a = v.data() + 1;
            const std::int64_t* b = rev.data() + (n - k + 1);
            std::int64_t total = 0;
            for (std::uint64_t i = 0; i + 1 < k; ++i)
                total += static_cast<std::int64_t>(a[i]) * b[i];
            next[k] = total;
        }
        cur = std::move(next);
    }
    return ConvolutionSeries(table.kind(), d, std::move(cur));
}

std::uint64_t fft_size(int d, std::uint64_t n)
{
    // Indices of the d-fold product reach d*N; a circular transform of
    // length >= d*N folds nothing back onto 1..N.
    return next_pow2(static_cast<std::uint64_t>(d) * n);
}

double fft_rounding_bound(int d, std::uint64_t n)
{
    const double max_abs = std::max(1.0, binomial(static_cast<double>(n) - 1.0, d - 1));
    return guard_for(fft_size(d, n), max_abs);
}

ConvolutionSeries convolve_fft(const SieveTable& table, int d, std::uint64_t n)
{
    check_request(table, d, n);
    check_int64_range(d, n);
    const double predicted = fft_rounding_bound(d, n);
    const auto v = table.values();
    RealFft fft(fft_size(d, n));
    auto in = fft.real();
    std::fill(in.begin(), in.end(), 0.0);
    double energy = 0.0;
    for (std::uint64_t k = 1; k <= n; ++k) {
        in[k] = v[k];
        energy += v[k] * v[k];
    }
    fft.forward();
    if (predicted >= kGuardLimit) {
        double peak = 0.0;
        for (const auto& z : fft.spectrum())
            peak = std::max(peak, std::hypot(z[0], z[1]));
        const double spectral = spectral_rounding_bound(d, fft.size(), peak, std::sqrt(energy));
        if (spectral >= kGuardLimit)
            throw PrecisionGuardError("FFT rounding guard failed for d = " + std::to_string(d)
                                      + ", N = " + std::to_string(n) + " (predicted error "
                                      + std::to_string(predicted) + ", spectral bound "
                                      + std::to_string(spectral)
                                      + " >= 0.25); use convolve_exact_blocked");
    }
    for (auto& z : fft.spectrum()) {
        const Complex base{z[0], z[1]};
        Complex p = base;
        for (int i = 1; i < d; ++i)
            p *= base;
        z[0] = p.real();
        z[1] = p.imag();
    }
    fft.inverse();
    std::vector<std::int64_t> out(n + 1, 0);
    round_certified(fft, n, [&](std::uint64_t k, double r) {
        out[k] = k < static_cast<std::uint64_t>(d) ? 0 : static_cast<std::int64_t>(r);
    });
    return ConvolutionSeries(table.kind(), d, std::move(out));
}

ConvolutionSeries convolve_exact_blocked(const SieveTable& table, int d, std::uint64_t n)
{
    check_request(table, d, n);
    check_int64_range(d, n);
    const auto v = table.values();
    std::vector<std::int64_t> cur(n + 1, 0);
    for (std::uint64_t k = 1; k <= n; ++k)
        cur[k] = v[k];
    for (int step = 2; step <= d; ++step)
        cur = exact_pair(cur, v, n);
    for (std::uint64_t k = 0; k < std::min<std::uint64_t>(d, n + 1); ++k)
        cur[k] = 0;
    return ConvolutionSeries(table.kind(), d, std::move(cur));
}

ConvolutionSeries convolve(const SieveTable& table, int d, std::uint64_t n)
{
    check_request(table, d, n);
    if (fft_rounding_bound(d, n) < kGuardLimit) {
        try {
            return convolve_fft(table, d, n);
        } catch (const PrecisionGuardError&) {
            // measured residual too large; fall through to the exact path
        }
    }
    return convolve_exact_blocked(table, d, n);
}

double cesaro_sum_order(const ConvolutionSeries& series, double x, int order)
{
    if (!std::isfinite(x) || x < 0.0)
        throw std::invalid_argument("cesaro_sum: x must be finite and nonnegative");
    if (x > static_cast<double>(series.limit()))
        throw SizingError("cesaro_sum: x = " + std::to_string(x) + " exceeds series limit "
                          + std::to_string(series.limit()));
    if (order < 0)
        throw std::invalid_argument("cesaro_sum: order must be nonnegative");
    long double factorial = 1.0L;
    for (int i = 2; i <= order; ++i)
        factorial *= i;
    const auto top = static_cast<std::uint64_t>(std::floor(x));
    const auto s = series.values();
    const long double lx = x;
    CompensatedSum<long double> acc;
    for (std::uint64_t n = static_cast<std::uint64_t>(series.d()); n <= top; ++n) {
        if (s[n] == 0)
            continue;
        const long double gap = lx - static_cast<long double>(n);
        long double w = 1.0L;
        for (int i = 0; i < order; ++i)
            w *= gap;
        acc.add(static_cast<long double>(s[n]) * w);
    }
    return static_cast<double>(acc.value() / factorial);
}

double cesaro_sum(const ConvolutionSeries& series, double x)
{
    return cesaro_sum_order(series, x, series.d() - 1);
}

namespace {

// Antiderivative (vanishing at 0) of the piece polynomial with `count` coefficients.
long double eval_antiderivative(const long double* c, int count, long double t)
{
    long double r = 0.0L;
    for (int i = count - 1; i >= 0; --i)
        r = r * t + c[i] / static_cast<long double>(i + 1);
    return r * t;
}

} // namespace

LaplaceConvolver::LaplaceConvolver(const SieveTable& table, int d, double max_x)
    : table_(&table), d_(d), max_x_(max_x)
{
    if (d < 2)
        throw std::invalid_argument("LaplaceConvolver needs d >= 2");
    if (!std::isfinite(max_x) || max_x < 0.0)
        throw std::invalid_argument("LaplaceConvolver: max_x must be finite and nonnegative");
    if (max_x > static_cast<double>(table.limit()))
        throw SizingError("LaplaceConvolver: x = " + std::to_string(max_x)
                          + " exceeds table limit " + std::to_string(table.limit()));
    if (d >= 3 && max_x > kMaxLaplacePolyLimit)
        throw SizingError("LaplaceConvolver: d >= 3 tables are quadratic in x; max_x above "
                          "1e5 is not supported");

    const auto pieces = static_cast<std::uint64_t>(std::floor(max_x)) + 1;
    const auto prefix = table.prefix();
    // Level 1: G itself, constant on each unit piece.
    int width = 1;
    std::vector<long double> level(pieces);
    for (std::uint64_t j = 0; j < pieces; ++j)
        level[j] = static_cast<long double>(prefix[std::min<std::uint64_t>(j, table.limit())]);

    for (int k = 1; k < d - 1; ++k) {
        // K(m + t) = sum_i c_i [P_{m-i}(t) - P_{m-i-1}(t) + P_{m-i-1}(1)], with
        // c_i = G on [i, i+1) and P_j the antiderivative of piece j of level k.
        const int next_width = width + 1;
        std::vector<long double> q(pieces * next_width, 0.0L);
        std::vector<long double> p_at_one(pieces, 0.0L);
        for (std::uint64_t j = 0; j < pieces; ++j) {
            const long double* c = &level[j * width];
            for (int i = 0; i < width; ++i)
                q[j * next_width + i + 1] += c[i] / static_cast<long double>(i + 1);
            p_at_one[j] = eval_antiderivative(c, width, 1.0L);
            if (j > 0) {
                const long double* prev = &level[(j - 1) * width];
                for (int i = 0; i < width; ++i)
                    q[j * next_width + i + 1] -= prev[i] / static_cast<long double>(i + 1);
                q[j * next_width] += p_at_one[j - 1];
            }
        }
        std::vector<long double> next(pieces * next_width, 0.0L);
        for (std::uint64_t m = 0; m < pieces; ++m) {
            long double* out = &next[m * next_width];
            for (std::uint64_t i = 1; i <= m; ++i) {
                const long double ci = static_cast<long double>(prefix[i]);
                if (ci == 0.0L)
                    continue;
                const long double* qj = &q[(m - i) * next_width];
                for (int t = 0; t < next_width; ++t)
                    out[t] += ci * qj[t];
            }
        }
        level = std::move(next);
        width = next_width;
    }
    inner_ = std::move(level);
}

double LaplaceConvolver::operator()(double x) const
{
    if (!std::isfinite(x) || x < 0.0)
        throw std::invalid_argument("laplace convolution: x must be finite and nonnegative");
    if (x > max_x_)
        throw SizingError("laplace convolution: x = " + std::to_string(x)
                          + " exceeds the prepared range " + std::to_string(max_x_));
    const int width = d_ - 1;
    const auto prefix = table_->prefix();
    const long double lx = x;
    const auto whole = static_cast<std::uint64_t>(std::floor(x));
    const long double frac = lx - static_cast<long double>(whole);

    // Breakpoints: integers 1..floor(x) and x - k (k = floor(x)..1), merged.
    std::vector<long double> cuts;
    cuts.reserve(2 * whole + 2);
    cuts.push_back(0.0L);
    std::uint64_t a = 1;
    std::uint64_t b = 0;  // next x - k is frac + b
    while (a <= whole || b < whole) {
        const long double ia = a <= whole ? static_cast<long double>(a) : lx + 1.0L;
        const long double ib = b < whole ? frac + static_cast<long double>(b) : lx + 1.0L;
        if (ia <= ib) {
            cuts.push_back(ia);
            ++a;
            if (ia == ib)
                ++b;
        } else {
            cuts.push_back(ib);
            ++b;
        }
    }
    cuts.push_back(lx);

    CompensatedSum<long double> acc;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const long double y0 = cuts[i];
        const long double y1 = cuts[i + 1];
        if (!(y1 > y0))
            continue;
        const long double mid = 0.5L * (y0 + y1);
        const auto gi = static_cast<std::uint64_t>(std::floor(mid));
        const long double g = static_cast<long double>(prefix[gi]);
        if (g == 0.0L)
            continue;
        const long double umid = lx - mid;
        const auto j = static_cast<std::uint64_t>(std::floor(umid));
        const long double r0 = std::max(0.0L, lx - y1 - static_cast<long double>(j));
        const long double r1 = std::min(1.0L, lx - y0 - static_cast<long double>(j));
        const long double* c = &inner_[j * width];
        acc.add(g * (eval_antiderivative(c, width, r1) - eval_antiderivative(c, width, r0)));
    }
    return static_cast<double>(acc.value());
}

double laplace_convolution_exact(const SieveTable& table, double x, int d)
{
    return LaplaceConvolver(table, d, x)(x);
}

void write_series_csv(const ConvolutionSeries& series, std::ostream& out)
{
    out << "n,value\n";
    const auto s = series.values();
    for (std::uint64_t n = static_cast<std::uint64_t>(series.d()); n <= series.limit(); ++n)
        out << n << ',' << s[n] << '\n';
}

} // namespace liouconv
