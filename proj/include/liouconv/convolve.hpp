#pragma once

// Additive convolutions S_d(n) = sum_{m_1 + ... + m_d = n} v(m_1) ... v(m_d)
// of a lambda / mu table, their Cesaro weighted sums, and the exact Laplace
// self-convolution of the step function L (or M).

#include <cstdint>
#include <filesystem>
#include <memory>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "liouconv/sieve.hpp"

namespace liouconv {

/// Raised when the floating-point rounding guard cannot certify an FFT result.
class PrecisionGuardError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConvolutionSeries {
public:
    ConvolutionSeries(Kind kind, int d, std::vector<std::int64_t> values);

    Kind kind() const { return kind_; }
    int d() const { return d_; }
    std::uint64_t limit() const { return limit_; }

    /// values()[n] = S_d(n) for 0 <= n <= limit (zero for n < d).
    std::span<const std::int64_t> values() const { return values_; }
    std::int64_t operator[](std::uint64_t n) const { return values_.at(n); }

    friend bool operator==(const ConvolutionSeries&, const ConvolutionSeries&) = default;

private:
    Kind kind_;
    int d_;
    std::uint64_t limit_;
    std::vector<std::int64_t> values_;
};

/// Direct O(d N^2) convolution; the exact oracle.
ConvolutionSeries convolve_naive(const SieveTable& table, int d, std::uint64_t n);

/// Predicted worst-case absolute rounding error of the FFT path:
/// eps * 8 * M * log2(M) * C(N-1, d-1), M the transform size.
double fft_rounding_bound(int d, std::uint64_t n);

/// Transform size used by the FFT path (next power of two >= d * N).
std::uint64_t fft_size(int d, std::uint64_t n);

/// Frequency-domain d-th power. When the combinatorial bound above is not
/// below 0.25, a second bound computed from the transformed data
/// (eps * d * max|X|^{d-1} * |x|_2 * (16 log2 M + d)) is tried. Throws
/// PrecisionGuardError if neither certifies the result, or if any output is
/// not within 0.25 of an integer; use convolve_exact_blocked then.
ConvolutionSeries convolve_fft(const SieveTable& table, int d, std::uint64_t n);

/// Exact fallback: repeated pairwise convolutions in which the wide operand
/// is split into small digit planes, each certified by the rounding guard,
/// and recombined in 128-bit integers.
ConvolutionSeries convolve_exact_blocked(const SieveTable& table, int d, std::uint64_t n);

/// FFT when the guard certifies it, blocked fallback otherwise.
ConvolutionSeries convolve(const SieveTable& table, int d, std::uint64_t n);

/// (1/(d-1)!) sum_{n <= x} S_d(n) (x - n)^{d-1}.
double cesaro_sum(const ConvolutionSeries& series, double x);

/// Same as cesaro_sum but for an arbitrary order: (1/k!) sum_{n<=x} S_d(n)(x-n)^k.
double cesaro_sum_order(const ConvolutionSeries& series, double x, int order);

/// Laplace d-fold self-convolution (G * ... * G)(x) of the step function
/// G = L or M, evaluated by exact integration over the breakpoints.
/// Piecewise-polynomial tables for the inner (d-1)-fold convolution are
/// built once (O(limit^2) for d >= 3) and reused across evaluations.
class LaplaceConvolver {
public:
    LaplaceConvolver(const SieveTable& table, int d, double max_x);

    int d() const { return d_; }
    double max_x() const { return max_x_; }
    double operator()(double x) const;

private:
    const SieveTable* table_;
    int d_;
    double max_x_;
    // Coefficients of (G^{*(d-1)}) on [j, j+1) in the local variable t,
    // stored as d-1 coefficients per piece (lowest degree first).
    std::vector<long double> inner_;
};

/// One-shot wrapper around LaplaceConvolver.
double laplace_convolution_exact(const SieveTable& table, double x, int d = 2);

/// CSV with header `n,value`, one row per n in [d, limit].
void write_series_csv(const ConvolutionSeries& series, std::ostream& out);

} // namespace liouconv
