#include "liouconv/explicit_formula.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "liouconv/specfun.hpp"

namespace liouconv {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

double log_factorial(int n)
{
    return std::lgamma(static_cast<double>(n) + 1.0);
}

// log cosh(t) without overflow.
double log_cosh(double t)
{
    const double a = std::abs(t);
    return a + std::log1p(std::exp(-2.0 * a)) - kLn2;
}

// Coefficient scale of the main term, used as the pruning reference for
// both kinds: pi / (4 zeta(1/2)^2 d!).
double main_scale(int d)
{
    const double z = zeta_half();
    return kPi / (4.0 * z * z) * std::exp(-log_factorial(d));
}

Complex conj_if(Complex z, bool c)
{
    return c ? std::conj(z) : z;
}

struct ZeroCache {
    Complex rho[2];
    Complex log_c[2];
    Complex log_gamma_rho[2];
    double log_abs_c = 0.0;
};

std::vector<ZeroCache> cache_zeros(Kind kind, std::span<const ZeroDatum> zeros, unsigned workers)
{
    std::vector<ZeroCache> out(zeros.size());
    parallel_chunks(zeros.size(), workers, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            for (int c = 0; c < 2; ++c) {
                out[i].rho[c] = conj_if(zeros[i].rho(), c == 1);
                out[i].log_c[c] = std::log(zero_coefficient(kind, zeros[i], c == 1));
                out[i].log_gamma_rho[c] = log_gamma(out[i].rho[c]);
            }
            out[i].log_abs_c = out[i].log_c[0].real();
        }
    });
    return out;
}

double window_height(const ZeroSet& zs, double T)
{
    (void)zs.window(T);
    return T;
}

} // namespace

Complex zero_coefficient(Kind kind, const ZeroDatum& z, bool conjugate)
{
    const Complex zp = conj_if(z.zprime, conjugate);
    if (kind == Kind::moebius)
        return 1.0 / zp;
    return conj_if(z.z2rho, conjugate) / zp;
}

ZeroExpansion ZeroExpansion::summatory(Kind kind, const ZeroSet& zs, double T)
{
    ZeroExpansion e;
    const auto zeros = zs.window(T);
    e.kind_ = kind;
    e.d_ = 1;
    e.T_ = T;
    e.zeros_used_ = zeros.size();
    if (kind == Kind::liouville) {
        e.main_coef_ = 1.0 / zeta_half();
        e.main_exp_ = 0.5;
    }
    e.singles_.reserve(2 * zeros.size());
    for (std::size_t i = 0; i < zeros.size(); ++i) {
        for (int c = 0; c < 2; ++c) {
            const Complex rho = conj_if(zeros[i].rho(), c == 1);
            const Complex log_alpha = std::log(zero_coefficient(kind, zeros[i], c == 1)) - std::log(rho);
            e.singles_.push_back({log_alpha, rho, static_cast<std::uint32_t>(i), c == 1});
        }
    }
    return e;
}

ZeroExpansion ZeroExpansion::cesaro(Kind kind, int d, const ZeroSet& zs, double T,
                                    const ExplicitOptions& opts)
{
    if (d < 2)
        throw std::invalid_argument("Cesaro expansion needs d >= 2");
    ZeroExpansion e;
    const auto zeros = zs.window(T);
    e.kind_ = kind;
    e.d_ = d;
    e.T_ = T;
    e.zeros_used_ = zeros.size();
    const auto cache = cache_zeros(kind, zeros, opts.workers);
    const double dd = static_cast<double>(d);

    if (kind == Kind::liouville) {
        e.main_coef_ = main_scale(d);
        e.main_exp_ = dd;
        const Complex log_lead = std::log(Complex{std::sqrt(kPi) / zeta_half(), 0.0});
        e.singles_.reserve(2 * zeros.size());
        for (std::size_t i = 0; i < zeros.size(); ++i) {
            for (int c = 0; c < 2; ++c) {
                const Complex rho = cache[i].rho[c];
                const Complex log_alpha = log_lead + cache[i].log_c[c] + cache[i].log_gamma_rho[c]
                                          - log_gamma(rho + dd + 0.5);
                e.singles_.push_back({log_alpha, rho + dd - 0.5, static_cast<std::uint32_t>(i), c == 1});
            }
        }
    }

    // Pairs: same-sign patterns are always evaluated; mixed-sign patterns are
    // first bounded with |Gamma(sigma + i t)| >= Gamma(sigma) sech(pi t)^{1/2}.
    const double log_threshold = std::log(opts.prune_relative * main_scale(d));
    const double sigma = 1.0 + dd;
    const double lgamma_sigma = std::lgamma(sigma);
    const std::size_t n = zeros.size();
    std::vector<std::vector<Pair>> rows(n);
    std::vector<std::uint64_t> pruned(n, 0);
    parallel_chunks(n, opts.workers, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t i = b0; i < b1; ++i) {
            auto& row = rows[i];
            row.reserve(2 * (n - i) + 4);
            for (std::size_t j = i; j < n; ++j) {
                const double log_weight = i == j ? 0.0 : kLn2;
                for (int ci = 0; ci < 2; ++ci) {
                    for (int cj = 0; cj < 2; ++cj) {
                        const Complex r1 = cache[i].rho[ci];
                        const Complex r2 = cache[j].rho[cj];
                        const Complex num = cache[i].log_c[ci] + cache[j].log_c[cj]
                                            + cache[i].log_gamma_rho[ci] + cache[j].log_gamma_rho[cj];
                        if (ci != cj) {
                            const double t = (r1 + r2).imag();
                            const double bound = num.real() + log_weight - lgamma_sigma
                                                 + 0.5 * log_cosh(kPi * t);
                            if (bound < log_threshold) {
                                ++pruned[i];
                                continue;
                            }
                        }
                        const Complex log_beta = num - log_gamma(r1 + r2 + dd) + log_weight;
                        if (log_beta.real() < log_threshold) {
                            ++pruned[i];
                            continue;
                        }
                        row.push_back({log_beta, r1 + r2 + dd - 1.0, static_cast<std::uint32_t>(i),
                                       static_cast<std::uint32_t>(j), ci == 1, cj == 1});
                    }
                }
            }
        }
    });
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total += rows[i].size();
        e.pruned_ += pruned[i];
    }
    e.pairs_.reserve(total);
    for (auto& row : rows) {
        e.pairs_.insert(e.pairs_.end(), row.begin(), row.end());
        row.clear();
        row.shrink_to_fit();
    }
    auto key = [&](const Pair& p) { return zeros[p.i].gamma + zeros[p.j].gamma; };
    std::sort(e.pairs_.begin(), e.pairs_.end(), [&](const Pair& x, const Pair& y) {
        const double kx = key(x);
        const double ky = key(y);
        if (kx != ky)
            return kx < ky;
        if (x.i != y.i)
            return x.i < y.i;
        if (x.j != y.j)
            return x.j < y.j;
        if (x.conj_i != y.conj_i)
            return x.conj_i < y.conj_i;
        return x.conj_j < y.conj_j;
    });
    return e;
}

ExplicitBreakdown ZeroExpansion::evaluate(const LogTransform& log_phi,
                                          const ExplicitOptions& opts) const
{
    ExplicitBreakdown out;
    if (main_coef_ != 0.0)
        out.main_term = main_coef_ * std::exp(log_phi(Complex{main_exp_, 0.0}));
    out.single_sum = deterministic_sum(singles_.size(), opts.workers, [&](std::size_t k) {
        const auto& t = singles_[k];
        return std::exp(t.log_alpha + log_phi(t.exponent));
    });
    out.double_sum = deterministic_sum(pairs_.size(), opts.workers, [&](std::size_t k) {
        const auto& t = pairs_[k];
        return std::exp(t.log_beta + log_phi(t.exponent));
    });
    out.total = out.main_term + out.single_sum + out.double_sum;
    out.truncation_T = T_;
    out.zeros_used = zeros_used_;
    out.pair_terms = pairs_.size();
    out.pruned_terms = pruned_;
    out.imag_residue = std::abs(out.total.imag());
    return out;
}

ExplicitBreakdown ZeroExpansion::at(double x, const ExplicitOptions& opts) const
{
    if (!(x > 0.0) || !std::isfinite(x))
        throw std::invalid_argument("explicit formula: x must be a positive finite real");
    const double lx = std::log(x);
    return evaluate([lx](Complex z) { return z * lx; }, opts);
}

ExplicitBreakdown explicit_summatory(Kind kind, double x, const ZeroSet& zs, double T,
                                     const ExplicitOptions& opts)
{
    const auto e = ZeroExpansion::summatory(kind, zs, T);
    auto out = e.at(x, opts);
    out.envelope = 1.0 + x * (std::abs(std::log(x)) + 1.0) / T;
    return out;
}

CesaroExplicit::CesaroExplicit(Kind kind, int d, const ZeroSet& zs, double T,
                               const ExplicitOptions& opts, bool extrapolated)
    : opts_(opts)
{
    if (d < 2)
        throw std::invalid_argument("explicit_cesaro: d must be at least 2");
    if (kind == Kind::moebius && d != 2 && !extrapolated)
        throw std::invalid_argument("explicit_cesaro: the Moebius formula is given for d = 2 only; "
                                    "pass the extrapolated flag to use d = "
                                    + std::to_string(d));
    expansion_ = ZeroExpansion::cesaro(kind, d, zs, T, opts);
}

ExplicitBreakdown CesaroExplicit::operator()(double x) const
{
    auto out = expansion_.at(x, opts_);
    const double d = expansion_.d();
    out.envelope = std::pow(x, d - 0.5 + 0.1) + std::pow(x, d - 1.0);
    return out;
}

ExplicitBreakdown explicit_cesaro(Kind kind, double x, const ZeroSet& zs, double T, int d,
                                  const ExplicitOptions& opts, bool extrapolated)
{
    return CesaroExplicit(kind, d, zs, T, opts, extrapolated)(x);
}

Complex dirichlet_direct(const ConvolutionSeries& series, Complex s, std::uint64_t n)
{
    require_finite(s, "dirichlet_direct: s");
    if (n > series.limit())
        throw SizingError("dirichlet_direct: N = " + std::to_string(n) + " exceeds series limit "
                          + std::to_string(series.limit()));
    const auto v = series.values();
    ComplexSum acc;
    for (std::uint64_t k = static_cast<std::uint64_t>(series.d()); k <= n; ++k) {
        if (v[k] == 0)
            continue;
        acc.add(static_cast<double>(v[k]) * std::exp(-s * std::log(static_cast<double>(k))));
    }
    return acc.value();
}

ExplicitBreakdown dirichlet_explicit(Kind kind, Complex s, const ZeroSet& zs, double T,
                                     const ExplicitOptions& opts)
{
    require_finite(s, "dirichlet_explicit: s");
    constexpr double kPoleTol = 1e-8;
    if (std::abs(1.0 - s) < kPoleTol)
        throw DomainError("dirichlet_explicit: s is within 1e-8 of the pole at s = 1");
    if (!(s.real() > 1.0))
        throw DomainError("dirichlet_explicit: the formula holds for Re s > 1");
    (void)window_height(zs, T);
    const auto e = ZeroExpansion::cesaro(kind, 2, zs, T, opts);
    const auto zeros = zs.window(T);

    for (const auto& t : e.singles()) {
        if (std::abs(t.exponent - 1.0 - s) < kPoleTol) {
            std::ostringstream os;
            os << "dirichlet_explicit: rho - s + 1/2 vanishes for zero #" << zeros[t.zero].index;
            throw DomainError(os.str());
        }
    }
    for (const auto& t : e.pairs()) {
        if (std::abs(t.exponent - 1.0 - s) < kPoleTol) {
            std::ostringstream os;
            os << "dirichlet_explicit: rho1 + rho2 - s vanishes for the pair (#"
               << zeros[t.i].index << (t.conj_i ? " conj" : "") << ", #" << zeros[t.j].index
               << (t.conj_j ? " conj" : "") << ")";
            throw DomainError(os.str());
        }
    }
    const Complex log_ss1 = std::log(s * (s + 1.0));
    auto out = e.evaluate([&](Complex z) { return log_ss1 - std::log(z - s - 1.0); }, opts);
    out.real_valued = s.imag() == 0.0;
    if (!out.real_valued)
        out.imag_residue = 0.0;
    out.envelope = std::abs(s * (s + 1.0)) / (s.real() - 0.6);
    return out;
}

PartialSummation dirichlet_partial_summation(const SieveTable& table,
                                             const ConvolutionSeries& series, Complex s, double H)
{
    require_finite(s, "dirichlet_partial_summation: s");
    if (series.d() != 2 || series.kind() != table.kind())
        throw std::invalid_argument("dirichlet_partial_summation: needs the d = 2 series of the table");
    if (!(H >= 1.0) || H > static_cast<double>(std::min(table.limit(), series.limit())))
        throw SizingError("dirichlet_partial_summation: H must lie in [1, limit]");
    const auto prefix = table.prefix();
    const auto top = static_cast<std::uint64_t>(std::floor(H));
    auto power = [&](double base, Complex e) { return std::exp(-e * std::log(base)); };

    ComplexSum boundary;
    for (std::uint64_t k = 1; k <= top; ++k) {
        if (prefix[k] == 0)
            continue;
        const double end = std::min(static_cast<double>(k + 1), H);
        if (!(end > static_cast<double>(k)))
            continue;
        boundary.add(static_cast<double>(prefix[k])
                     * (power(static_cast<double>(k) + 1.0, s) - power(end + 1.0, s)));
    }

    // On [n, n+1): C(h) = h P(n) - Q(n), P = sum S(m), Q = sum m S(m).
    const auto sv = series.values();
    ComplexSum bulk;
    long double p = 0.0L;
    long double q = 0.0L;
    for (std::uint64_t n = 1; n <= top; ++n) {
        p += static_cast<long double>(sv[n]);
        q += static_cast<long double>(sv[n]) * static_cast<long double>(n);
        const double lo = static_cast<double>(n);
        const double hi = std::min(lo + 1.0, H);
        if (!(hi > lo))
            continue;
        const Complex first = (s + 1.0) * static_cast<double>(p) * (power(lo, s) - power(hi, s));
        const Complex second = s * static_cast<double>(q) * (power(lo, s + 1.0) - power(hi, s + 1.0));
        bulk.add(first);
        bulk.add(-second);
    }
    PartialSummation out;
    out.boundary = -boundary.value();
    out.bulk = bulk.value();
    out.total = out.boundary + out.bulk;
    return out;
}

double exponential_direct(const ConvolutionSeries& series, double y, std::uint64_t n)
{
    if (!(y > 0.0) || !std::isfinite(y))
        throw std::invalid_argument("exponential_direct: y must be positive");
    if (n > series.limit())
        throw SizingError("exponential_direct: N exceeds series limit");
    if (static_cast<double>(n) * y < 20.0)
        throw SizingError("exponential_direct: N*y = " + std::to_string(static_cast<double>(n) * y)
                          + " < 20, the dropped tail is not negligible");
    const auto v = series.values();
    CompensatedSum<long double> acc;
    for (std::uint64_t k = static_cast<std::uint64_t>(series.d()); k <= n; ++k)
        if (v[k] != 0)
            acc.add(static_cast<long double>(v[k])
                    * std::exp(-static_cast<long double>(k) * static_cast<long double>(y)));
    return static_cast<double>(acc.value());
}

Complex exponential_factor(Kind kind, double y, const ZeroSet& zs, double T,
                           const ExplicitOptions& opts)
{
    if (!(y > 0.0))
        throw std::invalid_argument("exponential_factor: y must be positive");
    const auto zeros = zs.window(T);
    const auto cache = cache_zeros(kind, zeros, opts.workers);
    const double ly = std::log(y);
    return deterministic_sum(2 * zeros.size(), opts.workers, [&](std::size_t k) {
        const auto& z = cache[k / 2];
        const int c = static_cast<int>(k % 2);
        return std::exp(z.log_c[c] + z.log_gamma_rho[c] - z.rho[c] * ly);
    });
}

ExplicitBreakdown exponential_explicit(Kind kind, double y, const ZeroSet& zs, double T,
                                       const ExplicitOptions& opts)
{
    if (!(y > 0.0) || !std::isfinite(y))
        throw std::invalid_argument("exponential_explicit: y must be positive");
    const auto zeros = zs.window(T);
    ExplicitBreakdown out;
    const double ly = std::log(y);
    if (kind == Kind::liouville) {
        const double z = zeta_half();
        out.main_term = kPi / (4.0 * z * z * y);
        const auto cache = cache_zeros(kind, zeros, opts.workers);
        const Complex log_lead = std::log(Complex{std::sqrt(kPi) / z, 0.0});
        out.single_sum = deterministic_sum(2 * zeros.size(), opts.workers, [&](std::size_t k) {
            const auto& zc = cache[k / 2];
            const int c = static_cast<int>(k % 2);
            return std::exp(log_lead + zc.log_c[c] + zc.log_gamma_rho[c] - (zc.rho[c] + 0.5) * ly);
        });
    }
    const Complex factor = exponential_factor(kind, y, zs, T, opts);
    out.double_sum = factor * factor;
    out.total = out.main_term + out.single_sum + out.double_sum;
    out.truncation_T = T;
    out.zeros_used = zeros.size();
    out.pair_terms = static_cast<std::uint64_t>(2 * zeros.size()) * (2 * zeros.size());
    out.imag_residue = std::abs(out.total.imag());
    out.envelope = std::pow(y, -0.6) + 1.0;
    return out;
}

namespace {

// int_lo^b (b - w)^k w^z dw by repeated integration by parts.
Complex polynomial_moment(double lo, double b, int k, Complex z)
{
    if (k == 0) {
        const Complex hi_pow = std::exp((z + 1.0) * std::log(b));
        const Complex lo_pow = lo > 0.0 ? std::exp((z + 1.0) * std::log(lo)) : Complex{0.0, 0.0};
        return (hi_pow - lo_pow) / (z + 1.0);
    }
    const Complex lo_term = lo > 0.0 ? std::pow(b - lo, k) * std::exp((z + 1.0) * std::log(lo)) / (z + 1.0)
                                     : Complex{0.0, 0.0};
    return -lo_term + static_cast<double>(k) / (z + 1.0) * polynomial_moment(lo, b, k - 1, z + 1.0);
}

void check_weight(const WeightSpec& w)
{
    if (!(w.eta > 0.0) || !std::isfinite(w.eta))
        throw std::invalid_argument("WeightSpec: eta must be positive and finite");
    if (!(w.a < w.b) || !std::isfinite(w.a))
        throw std::invalid_argument("WeightSpec: need finite a < b");
    if (!w.f || !w.f_prime || !w.f_second)
        throw std::invalid_argument("WeightSpec: f, f' and f'' evaluators are required");
}

std::uint64_t last_index_below(double eta, double b)
{
    // largest n with n / eta < b
    double top = std::floor(eta * b);
    if (top / eta >= b)
        top -= 1.0;
    return top < 0.0 ? 0 : static_cast<std::uint64_t>(top);
}

// Running sums of the companion factor: G_1 = table prefix for d = 2, the
// summatory function of S_{d-1} otherwise. Returns jumps and prefix.
struct Companion {
    std::vector<std::int64_t> jump;
    std::vector<std::int64_t> prefix;
};

Companion companion(const SieveTable& table, int d, std::uint64_t top)
{
    Companion c;
    c.jump.assign(top + 1, 0);
    if (d == 2) {
        for (std::uint64_t m = 1; m <= top; ++m)
            c.jump[m] = table.values()[m];
    } else if (top >= 1) {
        const auto s = convolve_naive(table, d - 1, top);
        for (std::uint64_t m = 1; m <= top; ++m)
            c.jump[m] = s[m];
    }
    c.prefix.assign(top + 1, 0);
    for (std::uint64_t m = 1; m <= top; ++m)
        c.prefix[m] = c.prefix[m - 1] + c.jump[m];
    return c;
}

std::int64_t step_value(std::span<const std::int64_t> prefix, double u)
{
    if (u < 1.0)
        return 0;
    return prefix[static_cast<std::uint64_t>(std::floor(u))];
}

// A(eta a) * int_a^b B(eta v - eta a) f'(v) dv with B piecewise constant.
Complex boundary_term(const WeightSpec& w, std::span<const std::int64_t> a_prefix,
                      std::span<const std::int64_t> b_prefix)
{
    const double ea = w.eta * w.a;
    const std::int64_t lead = step_value(a_prefix, ea);
    if (lead == 0)
        return {0.0, 0.0};
    const auto& gl = gauss_legendre();
    ComplexSum acc;
    for (std::uint64_t k = 1;; ++k) {
        const double lo = w.a + static_cast<double>(k) / w.eta;
        if (lo >= w.b)
            break;
        if (k >= b_prefix.size())
            throw SizingError("weighted boundary term: table too small for eta (b - a)");
        const double hi = std::min(w.b, w.a + static_cast<double>(k + 1) / w.eta);
        const std::int64_t level = b_prefix[k];
        if (level == 0)
            continue;
        acc.add(static_cast<double>(level) * gl.integrate(w.f_prime, lo, hi));
    }
    return static_cast<double>(lead) * acc.value();
}

} // namespace

WeightSpec polynomial_weight(double a, double b, double eta, int p)
{
    if (p < 2)
        throw std::invalid_argument("polynomial_weight: p must be at least 2 so that f(b-) = f'(b-) = 0");
    if (!std::isfinite(b) || !(a < b))
        throw std::invalid_argument("polynomial_weight: need finite a < b");
    WeightSpec w;
    w.a = a;
    w.b = b;
    w.eta = eta;
    const double pd = p;
    w.f = [b, p](double v) { return Complex{std::pow(b - v, p), 0.0}; };
    w.f_prime = [b, p, pd](double v) { return Complex{-pd * std::pow(b - v, p - 1), 0.0}; };
    w.f_second = [b, p, pd](double v) { return Complex{pd * (pd - 1.0) * std::pow(b - v, p - 2), 0.0}; };
    const double lo = std::max(a, 0.0);
    w.log_moment = [lo, b, p, pd](Complex z) {
        return std::log(pd * (pd - 1.0) * polynomial_moment(lo, b, p - 2, z));
    };
    w.abs_moment = [lo, b, p, pd](double t) {
        return (pd * (pd - 1.0) * polynomial_moment(lo, b, p - 2, Complex{t, 0.0})).real();
    };
    check_weight(w);
    return w;
}

WeightSpec exponential_weight(double eta, double y)
{
    if (!(y > 0.0))
        throw std::invalid_argument("exponential_weight: y must be positive");
    WeightSpec w;
    w.a = 0.0;
    w.eta = eta;
    const double k = eta * y;
    w.f = [k](double v) { return Complex{std::exp(-k * v), 0.0}; };
    w.f_prime = [k](double v) { return Complex{-k * std::exp(-k * v), 0.0}; };
    w.f_second = [k](double v) { return Complex{k * k * std::exp(-k * v), 0.0}; };
    const double lk = std::log(k);
    w.log_moment = [lk](Complex z) { return (1.0 - z) * lk + log_gamma(z + 1.0); };
    w.abs_moment = [lk](double t) { return std::exp((1.0 - t) * lk + std::lgamma(t + 1.0)); };
    check_weight(w);
    return w;
}

WeightSpec power_weight(double eta, Complex s)
{
    if (!(s.real() > 1.0))
        throw DomainError("power_weight: needs Re s > 1");
    WeightSpec w;
    w.eta = eta;
    w.a = 1.0 / eta;
    w.real_valued = s.imag() == 0.0;
    w.f = [s](double v) { return std::exp(-s * std::log(v)); };
    w.f_prime = [s](double v) { return -s * std::exp(-(s + 1.0) * std::log(v)); };
    w.f_second = [s](double v) { return s * (s + 1.0) * std::exp(-(s + 2.0) * std::log(v)); };
    const double la = std::log(w.a);
    w.log_moment = [s, la](Complex z) {
        const Complex gap = s + 1.0 - z;
        if (!(gap.real() > 0.0))
            throw DomainError("power_weight moment diverges (Re(s + 1 - z) <= 0)");
        return std::log(s * (s + 1.0)) + (z - s - 1.0) * la - std::log(gap);
    };
    const double mag = std::abs(s * (s + 1.0));
    w.abs_moment = [s, la, mag](double t) {
        const double gap = s.real() + 1.0 - t;
        if (!(gap > 0.0))
            throw DomainError("power_weight absolute moment diverges");
        return mag * std::exp((t - s.real() - 1.0) * la) / gap;
    };
    check_weight(w);
    return w;
}

Complex weighted_average_direct(const WeightSpec& w, const SieveTable& table, int d)
{
    check_weight(w);
    if (d < 2)
        throw std::invalid_argument("weighted_average_direct: d must be at least 2");
    if (!std::isfinite(w.b))
        throw std::invalid_argument("weighted_average_direct: needs finite b");
    const std::uint64_t top = last_index_below(w.eta, w.b);
    if (top > table.limit())
        throw SizingError("weighted_average_direct: eta*b = " + std::to_string(w.eta * w.b)
                          + " exceeds table limit " + std::to_string(table.limit()));
    if (top < static_cast<std::uint64_t>(d))
        return {0.0, 0.0};
    const auto other = companion(table, d, top);
    const auto v = table.values();
    const double ea = w.eta * w.a;
    const std::uint64_t first = ea < 0.0 ? 1 : static_cast<std::uint64_t>(std::floor(ea)) + 1;
    ComplexSum acc;
    for (std::uint64_t n = 2; n <= top; ++n) {
        const double u = static_cast<double>(n) / w.eta;
        if (u < w.a || u >= w.b)
            continue;
        std::int64_t weight = 0;
        for (std::uint64_t n1 = first; n1 < n; ++n1)
            weight += static_cast<std::int64_t>(v[n1]) * other.jump[n - n1];
        if (weight != 0)
            acc.add(static_cast<double>(weight) * w.f(u));
    }
    return acc.value();
}

IdentityTerms weighted_identity_rhs(const WeightSpec& w, const SieveTable& table, int d)
{
    check_weight(w);
    if (d < 2)
        throw std::invalid_argument("weighted_identity_rhs: d must be at least 2");
    if (!std::isfinite(w.b))
        throw std::invalid_argument("weighted_identity_rhs: needs finite b");
    const double eb = w.eta * w.b;
    const double ea = w.eta * w.a;
    const auto top = static_cast<std::uint64_t>(std::ceil(eb));
    if (top > table.limit())
        throw SizingError("weighted_identity_rhs: eta*b = " + std::to_string(eb)
                          + " exceeds table limit " + std::to_string(table.limit()));
    const auto other = companion(table, d, top);
    const auto a_prefix = table.prefix();

    IdentityTerms out;
    out.boundary = boundary_term(w, a_prefix, other.prefix);

    // H(u) = int_{eta a}^{u} A(s) B(u - s) ds is continuous and piecewise
    // linear in u with kinks at integers and at eta a + integers; its slope
    // there is h(u) = sum_{1 <= m <= u - eta a} b(m) A(u - m).
    std::vector<double> cuts;
    const double start = std::max(ea, 0.0);
    cuts.push_back(start);
    for (double k = std::floor(start) + 1.0; k < eb; k += 1.0)
        cuts.push_back(k);
    for (double m = 1.0; ea + m < eb; m += 1.0)
        if (ea + m > start)
            cuts.push_back(ea + m);
    cuts.push_back(eb);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const auto& gl = gauss_legendre();
    ComplexSum bulk;
    long double h_at = 0.0L;  // H at the left cut
    for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
        const double u0 = cuts[j];
        const double u1 = cuts[j + 1];
        const double mid = 0.5 * (u0 + u1);
        std::int64_t slope = 0;
        const double reach = mid - ea;
        if (reach >= 1.0) {
            const auto mmax = static_cast<std::uint64_t>(std::floor(reach));
            for (std::uint64_t m = 1; m <= mmax; ++m) {
                if (other.jump[m] == 0)
                    continue;
                slope += other.jump[m] * step_value(a_prefix, mid - static_cast<double>(m));
            }
        }
        const long double h0 = h_at;
        const double s = static_cast<double>(slope);
        const double w0 = u0 / w.eta;
        const double w1 = u1 / w.eta;
        if (h0 != 0.0L || slope != 0) {
            const double base = static_cast<double>(h0);
            bulk.add(gl.integrate(
                [&](double wv) { return w.f_second(wv) * (base + s * (w.eta * wv - u0)); }, w0, w1));
        }
        h_at = h0 + static_cast<long double>(slope) * (static_cast<long double>(u1) - u0);
    }
    out.bulk = bulk.value() / w.eta;
    out.total = out.boundary + out.bulk;
    return out;
}

namespace {

// int_lo^b f''(w) w^z dw on logarithmic panels, doubling until two
// successive refinements agree.
Complex numeric_moment(const WeightSpec& w, double lo, Complex z)
{
    const double l0 = std::log(lo);
    const double l1 = std::log(w.b);
    const auto& gl = gauss_legendre();
    auto integrand = [&](double u) {
        return w.f_second(std::exp(u)) * std::exp((z + 1.0) * u);
    };
    std::size_t panels = std::max<std::size_t>(
        4, static_cast<std::size_t>(std::ceil(std::abs(z.imag()) * (l1 - l0) / kPi)) + 1);
    Complex prev = gl.integrate(integrand, l0, l1, panels);
    for (int round = 0; round < 12; ++round) {
        panels *= 2;
        const Complex next = gl.integrate(integrand, l0, l1, panels);
        const double scale = gl.integrate(
            [&](double u) { return std::abs(w.f_second(std::exp(u))) * std::exp((z.real() + 1.0) * u); },
            l0, l1, panels);
        if (std::abs(next - prev) <= 1e-10 * (std::abs(next) + scale))
            return next;
        prev = next;
    }
    throw DomainError("weighted moment: Gauss-Legendre panels did not converge");
}

double abs_moment(const WeightSpec& w, double lo, double t)
{
    if (w.abs_moment)
        return w.abs_moment(t);
    if (!std::isfinite(w.b) || !(lo > 0.0))
        return std::numeric_limits<double>::quiet_NaN();
    const double l0 = std::log(lo);
    const double l1 = std::log(w.b);
    return gauss_legendre().integrate(
        [&](double u) { return std::abs(w.f_second(std::exp(u))) * std::exp((t + 1.0) * u); }, l0, l1, 64);
}

} // namespace

ExplicitBreakdown weighted_explicit(Kind kind, const WeightSpec& w, const ZeroSet& zs, double T,
                                    int d, const SieveTable* table, const ExplicitOptions& opts)
{
    check_weight(w);
    if (d < 2)
        throw std::invalid_argument("weighted_explicit: d must be at least 2");
    const double lo = std::max(w.a, 0.0);
    if (!w.log_moment && (!std::isfinite(w.b) || !(lo > 0.0)))
        throw DomainError("weighted_explicit: numeric moments need finite b and a > 0; "
                          "supply closed-form moments otherwise");
    Complex extra{0.0, 0.0};
    if (w.extra_term_active()) {
        if (d != 2)
            throw std::invalid_argument("weighted_explicit: eta*a >= 1 is only covered for d = 2");
        if (table == nullptr)
            throw std::invalid_argument("weighted_explicit: eta*a >= 1 needs a sieve table for the "
                                        "boundary term");
        if (table->kind() != kind)
            throw std::invalid_argument("weighted_explicit: table kind does not match");
        if (!std::isfinite(w.b))
            throw std::invalid_argument("weighted_explicit: the boundary term needs finite b");
        const auto top = static_cast<std::uint64_t>(std::ceil(w.eta * (w.b - w.a))) + 1;
        if (top > table->limit())
            throw SizingError("weighted_explicit: table too small for the boundary term");
        extra = boundary_term(w, table->prefix(), table->prefix());
    }
    const auto e = ZeroExpansion::cesaro(kind, d, zs, T, opts);
    const double le = std::log(w.eta);
    auto out = e.evaluate(
        [&](Complex z) {
            const Complex m = w.log_moment ? w.log_moment(z) : std::log(numeric_moment(w, lo, z));
            return (z - 1.0) * le + m;
        },
        opts);
    out.extra_term = extra;
    out.main_term += extra;
    out.total = out.main_term + out.single_sum + out.double_sum;
    out.real_valued = w.real_valued;
    out.imag_residue = w.real_valued ? std::abs(out.total.imag()) : 0.0;
    const double dd = d;
    out.envelope = std::pow(w.eta, dd - 1.5 + 0.1) * abs_moment(w, lo, dd - 0.5 + 0.1)
                   + std::pow(w.eta, dd - 2.0) * abs_moment(w, lo, dd - 1.0);
    return out;
}

std::vector<DoubleSeriesPoint> double_series_diagnostic(const ZeroSet& zs, double k, Kind coeff_kind,
                                                        std::size_t K, unsigned workers)
{
    if (K > zs.size())
        throw std::invalid_argument("double_series_diagnostic: K = " + std::to_string(K)
                                    + " exceeds the " + std::to_string(zs.size()) + " loaded zeros");
    const std::array<std::size_t, 4> marks = {K / 8, K / 4, K / 2, K};
    std::vector<DoubleSeriesPoint> out;
    for (auto m : marks)
        out.push_back({m, 0.0});
    if (K == 0)
        return out;
    const auto zeros = zs.first(K);
    const auto cache = cache_zeros(coeff_kind, zeros, workers);
    const double shift = 1.0 + k;
    // bucket[j]: all ordered terms whose larger index is j.
    std::vector<double> bucket(K, 0.0);
    parallel_chunks(K, workers, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t j = b0; j < b1; ++j) {
            CompensatedSum<double> acc;
            for (std::size_t i = 0; i <= j; ++i) {
                const double mult = i == j ? 2.0 : 4.0;
                for (int cj = 0; cj < 2; ++cj) {
                    const Complex r1 = cache[i].rho[0];
                    const Complex r2 = cache[j].rho[cj];
                    const double log_mag = cache[i].log_abs_c + cache[j].log_abs_c
                                           + cache[i].log_gamma_rho[0].real()
                                           + cache[j].log_gamma_rho[cj].real()
                                           - log_gamma(r1 + r2 + shift).real();
                    acc.add(mult * std::exp(log_mag));
                }
            }
            bucket[j] = acc.value();
        }
    });
    CompensatedSum<double> running;
    std::size_t next = 0;
    for (std::size_t j = 0; j < K; ++j) {
        running.add(bucket[j]);
        while (next < marks.size() && marks[next] == j + 1)
            out[next++].absolute_sum = running.value();
    }
    return out;
}

} // namespace liouconv
