#pragma once

// Complex special functions used by the explicit formulas: log-Gamma on the
// right half-plane and the Riemann zeta function (with its derivative) for
// Re(s) >= 0.4 via Euler-Maclaurin summation.

#include <stdexcept>

#include "liouconv/numeric.hpp"

namespace liouconv {

class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Throws DomainError if either component is NaN or infinite.
void require_finite(Complex z, const char* what);

/// Principal branch of log Gamma(z) for Re z > 0.
Complex log_gamma(Complex z);

/// Gamma(r1) Gamma(r2) / Gamma(r1 + r2 + shift), computed in the log domain.
Complex gamma_ratio(Complex r1, Complex r2, double shift);

/// log of gamma_ratio (same branch conventions as log_gamma).
Complex log_gamma_ratio(Complex r1, Complex r2, double shift);

struct ZetaOptions {
    /// Number of Euler-Maclaurin correction terms (1..30).
    int correction_terms = 20;
};

/// Riemann zeta for Re s >= 0.4, |s - 1| > 1e-6.
Complex zeta(Complex s, ZetaOptions opts = {});

/// Derivative of zeta, term-wise differentiated Euler-Maclaurin.
Complex zeta_derivative(Complex s, ZetaOptions opts = {});

/// zeta(s) and zeta'(s) from one pass over the Dirichlet terms.
struct ZetaPair {
    Complex value;
    Complex derivative;
};
ZetaPair zeta_with_derivative(Complex s, ZetaOptions opts = {});

/// zeta(1/2), evaluated once and cached.
double zeta_half();

inline constexpr double kPi = 3.14159265358979323846;

} // namespace liouconv
