#pragma once

// Non-trivial zeta zeros rho = 1/2 + i*gamma (positive ordinates only),
// enriched with zeta'(rho) and zeta(2 rho), plus a binary cache and the
// partial sums used as simplicity diagnostics.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "liouconv/numeric.hpp"
#include "liouconv/specfun.hpp"

namespace liouconv {

/// Malformed ordinate text or cache file. line() is 0 when not applicable.
class ZeroFormatError : public std::runtime_error {
public:
    ZeroFormatError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(what), line_(line)
    {
    }
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// An ordinate that fails the residual or simplicity check.
class ZeroResidualError : public std::runtime_error {
public:
    ZeroResidualError(const std::string& what, std::uint64_t index, double gamma)
        : std::runtime_error(what), index_(index), gamma_(gamma)
    {
    }
    std::uint64_t index() const { return index_; }
    double gamma() const { return gamma_; }

private:
    std::uint64_t index_;
    double gamma_;
};

struct Ordinate {
    std::uint64_t index;
    double gamma;
};

struct ZeroDatum {
    std::uint64_t index;
    double gamma;
    Complex zprime;  // zeta'(1/2 + i gamma)
    Complex z2rho;   // zeta(1 + 2 i gamma)

    Complex rho() const { return {0.5, gamma}; }
    friend bool operator==(const ZeroDatum&, const ZeroDatum&) = default;
};

/// No zero has ordinate below this, so truncations T <= it need no data.
inline constexpr double kFirstOrdinateFloor = 14.0;

/// Parses one ordinate per line, optionally preceded by an integer index
/// (separated by whitespace or a comma). Blank lines and '#' comments are
/// skipped. Without an index column, zeros are numbered from 1.
std::vector<Ordinate> load_ordinates(std::istream& in);
std::vector<Ordinate> load_ordinates(const std::filesystem::path& path);

class ZeroSet {
public:
    ZeroSet() = default;
    /// Validates ordering, index contiguity and gamma > 14.
    ZeroSet(std::vector<ZeroDatum> zeros, double tolerance);

    std::span<const ZeroDatum> zeros() const { return zeros_; }
    std::size_t size() const { return zeros_.size(); }
    bool empty() const { return zeros_.empty(); }
    const ZeroDatum& operator[](std::size_t i) const { return zeros_[i]; }

    /// Largest ordinate present (0 for an empty set).
    double t_max() const { return zeros_.empty() ? 0.0 : zeros_.back().gamma; }
    /// Residual tolerance the set was verified against.
    double tolerance() const { return tolerance_; }

    /// Zeros with 0 < gamma < T; T == t_max admits the whole set. Throws
    /// std::invalid_argument when T exceeds t_max (and the first-ordinate
    /// floor): silent truncation is refused.
    std::span<const ZeroDatum> window(double T) const;

    /// Height T with window(T) equal to the first k zeros: the midpoint of
    /// gamma_k and gamma_{k+1}, 14 for k == 0, t_max when k == size().
    double truncation_for_count(std::size_t k) const;

    /// First k zeros as a span (k <= size()).
    std::span<const ZeroDatum> first(std::size_t k) const;

    friend bool operator==(const ZeroSet&, const ZeroSet&) = default;

private:
    std::vector<ZeroDatum> zeros_;
    double tolerance_ = 1e-6;
};

struct EnrichOptions {
    double residual_tolerance = 1e-6;
    double min_abs_zprime = 1e-8;
    unsigned workers = 1;
};

/// Returns (zeta(s), zeta'(s)).
using ZetaEvaluator = std::function<ZetaPair(Complex)>;

/// Evaluates zeta'(rho), zeta(2 rho) and the residual |zeta(rho)| for every
/// ordinate. The first failing ordinate (lowest index) is reported.
ZeroSet enrich(std::span<const Ordinate> ordinates, const EnrichOptions& opts = {},
               const ZetaEvaluator& evaluator = {});

/// Re-checks |zeta(rho)| < set.tolerance() for every stored zero.
void verify_residuals(const ZeroSet& set, unsigned workers = 1,
                      const ZetaEvaluator& evaluator = {});

/// Binary cache: 32-byte header (magic "LZCACHE\0", u32 version, u32
/// reserved, u64 count, f64 tolerance), 48-byte records, trailing CRC-32.
void save_cache(const ZeroSet& set, const std::filesystem::path& path);
ZeroSet load_cache(const std::filesystem::path& path, bool verify = true, unsigned workers = 1);
bool is_cache_file(const std::filesystem::path& path);

/// Text ordinates (enriched on the fly) or a cache, detected by magic.
ZeroSet load_zero_set(const std::filesystem::path& path, const EnrichOptions& opts = {});

/// Header `index,gamma,zprime_re,zprime_im,z2_re,z2_im`, full precision.
void write_zero_csv(const ZeroSet& set, std::ostream& out);

struct SzDiagnostic {
    double sum_inv_zp = 0.0;          // sum 1/|zeta'(rho)|
    double sum_z2_over_rho_zp = 0.0;  // sum |zeta(2 rho)| / |rho zeta'(rho)|
    double normalized = 0.0;          // sum_inv_zp / (T sqrt(log T))
    std::size_t zeros_used = 0;
};

/// Sums over 0 < gamma < T. T > t_max is rejected.
SzDiagnostic sz_diagnostic(const ZeroSet& set, double T);

/// (T / 2 pi) log(T / (2 pi e)), the leading terms of the zero count N(T).
double zero_count_estimate(double T);

} // namespace liouconv
