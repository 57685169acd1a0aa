#pragma once

// Truncated explicit formulas over the zeta zeros for L(x), M(x), their
// Laplace self-convolutions and d-fold Cesaro means, the Dirichlet and
// exponential series of S(n), and general weighted averages; plus the exact
// (zero-free) identities these formulas are checked against.

#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "liouconv/convolve.hpp"
#include "liouconv/numeric.hpp"
#include "liouconv/sieve.hpp"
#include "liouconv/zeros.hpp"

namespace liouconv {

struct ExplicitOptions {
    unsigned workers = 1;
    /// Pair terms whose coefficient bound falls below this multiple of the
    /// main-term coefficient scale are skipped (and counted as pruned).
    double prune_relative = 1e-18;
};

struct ExplicitBreakdown {
    Complex main_term{};
    Complex single_sum{};
    Complex double_sum{};
    Complex total{};  // main_term + single_sum + double_sum
    /// Part of main_term coming from the boundary term of a weighted
    /// average with eta * a >= 1 (zero otherwise).
    Complex extra_term{};
    double truncation_T = 0.0;
    std::size_t zeros_used = 0;
    std::uint64_t pair_terms = 0;   // evaluated pair terms
    std::uint64_t pruned_terms = 0;
    /// |Im total| when the quantity is real, 0 for complex-valued formulas.
    double imag_residue = 0.0;
    double envelope = 0.0;
    bool real_valued = true;
};

/// An explicit formula written as
///   A * Phi(p0) + sum_rho alpha(rho) Phi(p(rho)) + sum_{rho1,rho2} beta Phi(q)
/// where Phi is the transform applied to x^z (x^z itself for pointwise
/// formulas, Mellin- or Laplace-type integrals for weighted averages).
/// Conjugate zeros are expanded explicitly; unordered pairs {i, j} carry
/// the four sign patterns with weight 2 for i < j, sorted by gamma_i + gamma_j.
class ZeroExpansion {
public:
    /// log Phi(z); may return -inf real part for a vanishing transform.
    using LogTransform = std::function<Complex(Complex)>;

    /// L(x) or M(x): x^{1/2}/zeta(1/2) + sum zeta(2 rho) x^rho / (zeta'(rho) rho).
    static ZeroExpansion summatory(Kind kind, const ZeroSet& zs, double T);

    /// (G * ... * G)(x), d factors: main x^d pi/(4 zeta(1/2)^2 d!), single
    /// terms with Gamma(rho)/Gamma(rho+d+1/2), pair terms with
    /// Gamma(rho1)Gamma(rho2)/Gamma(rho1+rho2+d). Moebius keeps pairs only.
    static ZeroExpansion cesaro(Kind kind, int d, const ZeroSet& zs, double T,
                                const ExplicitOptions& opts = {});

    ExplicitBreakdown evaluate(const LogTransform& log_phi, const ExplicitOptions& opts = {}) const;

    /// Pointwise value: Phi(z) = x^z.
    ExplicitBreakdown at(double x, const ExplicitOptions& opts = {}) const;

    struct Single {
        Complex log_alpha;
        Complex exponent;
        std::uint32_t zero;  // position in the window
        bool conjugate;
    };
    struct Pair {
        Complex log_beta;  // includes the multiplicity weight
        Complex exponent;
        std::uint32_t i;
        std::uint32_t j;
        bool conj_i;
        bool conj_j;
    };

    Kind kind() const { return kind_; }
    int d() const { return d_; }
    double truncation_T() const { return T_; }
    std::size_t zeros_used() const { return zeros_used_; }
    std::uint64_t pruned_terms() const { return pruned_; }
    double main_coefficient() const { return main_coef_; }
    double main_exponent() const { return main_exp_; }
    const std::vector<Single>& singles() const { return singles_; }
    const std::vector<Pair>& pairs() const { return pairs_; }

private:
    Kind kind_ = Kind::liouville;
    int d_ = 0;
    double T_ = 0.0;
    std::size_t zeros_used_ = 0;
    std::uint64_t pruned_ = 0;
    double main_coef_ = 0.0;
    double main_exp_ = 0.0;
    std::vector<Single> singles_;
    std::vector<Pair> pairs_;
};

/// L(x) (liouville) or M(x) (moebius) from the zeros with |gamma| < T.
/// envelope = 1 + x(|log x| + 1)/T.
ExplicitBreakdown explicit_summatory(Kind kind, double x, const ZeroSet& zs, double T,
                                     const ExplicitOptions& opts = {});

/// Prepared d-fold Cesaro formula, reusable across many x.
/// Moebius with d != 2 requires `extrapolated`.
class CesaroExplicit {
public:
    CesaroExplicit(Kind kind, int d, const ZeroSet& zs, double T, const ExplicitOptions& opts = {},
                   bool extrapolated = false);

    /// envelope = x^{d - 1/2 + 0.1} + x^{d-1}.
    ExplicitBreakdown operator()(double x) const;
    const ZeroExpansion& expansion() const { return expansion_; }

private:
    ZeroExpansion expansion_;
    ExplicitOptions opts_;
};

ExplicitBreakdown explicit_cesaro(Kind kind, double x, const ZeroSet& zs, double T, int d = 2,
                                  const ExplicitOptions& opts = {}, bool extrapolated = false);

/// sum_{n <= N} S_d(n) n^{-s}, compensated.
Complex dirichlet_direct(const ConvolutionSeries& series, Complex s, std::uint64_t n);

/// Dirichlet series of S (or S*) from the zeros, in the form displayed for
/// Re s > 1: main s(s+1)pi/(8 zeta(1/2)^2 (1 - s)), single terms over
/// (rho - s + 1/2), pair terms over (rho1 + rho2 - s).
/// envelope = |s(s+1)| / (Re s - 0.6). Throws DomainError on a pole
/// collision closer than 1e-8 (the offending term is named).
ExplicitBreakdown dirichlet_explicit(Kind kind, Complex s, const ZeroSet& zs, double T,
                                     const ExplicitOptions& opts = {});

/// Partial-summation form of the Dirichlet series up to height H:
///   boundary = -s int_0^H G(g) (g+1)^{-s-1} dg
///   bulk     = s(s+1) int_1^H C(h) h^{-s-2} dh,  C(h) = sum_{n<=h} S(n)(h-n)
/// with both integrals evaluated piece by piece in closed form.
struct PartialSummation {
    Complex boundary;
    Complex bulk;
    Complex total;
};
PartialSummation dirichlet_partial_summation(const SieveTable& table,
                                             const ConvolutionSeries& series, Complex s,
                                             double H);

/// sum_{n <= N} S_d(n) e^{-n y}; requires N y >= 20.
double exponential_direct(const ConvolutionSeries& series, double y, std::uint64_t n);

/// Power series of S (or S*) at e^{-y}: main pi/(4 zeta(1/2)^2 y), single
/// sum with Gamma(rho) y^{-rho-1/2}, and the double sum formed as the square
/// of F = sum_rho c(rho) Gamma(rho) y^{-rho}. envelope = y^{-0.6} + 1.
ExplicitBreakdown exponential_explicit(Kind kind, double y, const ZeroSet& zs, double T,
                                       const ExplicitOptions& opts = {});

/// The factor F used by exponential_explicit (so callers can check the
/// double term against F^2).
Complex exponential_factor(Kind kind, double y, const ZeroSet& zs, double T,
                           const ExplicitOptions& opts = {});

/// Weight f supported on [a, b) with scale eta. The caller guarantees
/// f(b-) = f'(b-) = 0 and that f' is absolutely continuous on (a, b).
struct WeightSpec {
    double a = 0.0;
    double b = std::numeric_limits<double>::infinity();
    double eta = 1.0;
    std::function<Complex(double)> f;
    std::function<Complex(double)> f_prime;
    std::function<Complex(double)> f_second;
    /// Optional closed form of int_{max(a,0)}^b f''(w) w^z dw, as a logarithm.
    std::function<Complex(Complex)> log_moment;
    /// Optional closed form of int_{max(a,0)}^b |f''(w)| w^t dw for real t.
    std::function<double(double)> abs_moment;
    /// False when f takes non-real values (e.g. w^{-s} with complex s).
    bool real_valued = true;

    bool extra_term_active() const { return eta * a >= 1.0; }
};

/// f(w) = (b - w)^p on [a, b), p >= 2, with closed-form moments.
WeightSpec polynomial_weight(double a, double b, double eta, int p);
/// f(w) = exp(-w eta y) on [0, inf).
WeightSpec exponential_weight(double eta, double y);
/// f(w) = w^{-s} on [1/eta, inf), Re s > 1.
WeightSpec power_weight(double eta, Complex s);

/// sum over n_1 > eta a, n_2..n_d >= 1 of v(n_1)...v(n_d) f((n_1+...+n_d)/eta),
/// with f taken as 0 outside [a, b). Needs finite b and eta b <= table limit.
Complex weighted_average_direct(const WeightSpec& w, const SieveTable& table, int d = 2);

/// The exact (zero-free) right-hand side: boundary + bulk where
///   boundary = G(eta a) int_a^b G_{d-1}(eta v - eta a) f'(v) dv
///   bulk     = (1/eta) int_a^b f''(w) int_{eta a}^{eta w} G(s) G_{d-1}(eta w - s) ds dw
/// G is L or M and G_{d-1} the summatory function of S_{d-1} (G itself for d = 2).
struct IdentityTerms {
    Complex boundary;
    Complex bulk;
    Complex total;
};
IdentityTerms weighted_identity_rhs(const WeightSpec& w, const SieveTable& table, int d = 2);

/// The explicit-formula right-hand side: (1/eta) int f''(w) X(eta w) dw with
/// X the d-fold expansion, evaluated through moments. Adds the boundary term
/// (as extra_term, included in main_term) when eta a >= 1; that case needs
/// `table` and d = 2. Uses adaptive Gauss-Legendre moments when the weight
/// has no closed form (finite b and a > 0 required then).
ExplicitBreakdown weighted_explicit(Kind kind, const WeightSpec& w, const ZeroSet& zs, double T,
                                    int d = 2, const SieveTable* table = nullptr,
                                    const ExplicitOptions& opts = {});

/// Absolute partial sums A(K') of the double series with Gamma(rho1 + rho2 + 1 + k)
/// over the first K' zeros (all four sign patterns), for K' in {K/8, K/4, K/2, K}.
struct DoubleSeriesPoint {
    std::size_t zeros = 0;
    double absolute_sum = 0.0;
};
std::vector<DoubleSeriesPoint> double_series_diagnostic(const ZeroSet& zs, double k, Kind coeff_kind,
                                                        std::size_t K, unsigned workers = 1);

/// Coefficient c(rho): zeta(2 rho)/zeta'(rho) (liouville) or 1/zeta'(rho) (moebius).
Complex zero_coefficient(Kind kind, const ZeroDatum& z, bool conjugate = false);

} // namespace liouconv
