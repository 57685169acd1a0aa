#include "liouconv/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <fftw3.h>
#include <json.hpp>
#include <zlib.h>

#include "liouconv/convolve.hpp"
#include "liouconv/explicit_formula.hpp"
#include "liouconv/sieve.hpp"
#include "liouconv/specfun.hpp"
#include "liouconv/zeros.hpp"

namespace liouconv::cli {

namespace {

constexpr const char* kVersion = "1.0.0";

using ordered_json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string command;
    std::string target;
    std::string kind = "liouville";
    std::uint64_t limit = 0;
    std::string zeros;
    std::vector<std::size_t> counts;
    std::optional<double> T;
    int d = 2;
    std::string s = "2,0";
    std::vector<double> y;
    std::string samples;
    double a = 0.0;
    double b = 1.0;
    int p = 2;
    bool extrapolated = false;
    std::string output;
    std::string csv;
    std::string format = "csv";
    unsigned workers = 1;
    int trials = 0; // 0: 20 identity trials, 3 bench repetitions
    std::uint64_t seed = 1;
    std::string config_path;
};

ordered_json config_json(const RunConfig& c)
{
    ordered_json j;
    j["command"] = c.command;
    if (!c.target.empty())
        j["target"] = c.target;
    j["kind"] = c.kind;
    j["limit"] = c.limit;
    j["zeros"] = c.zeros;
    j["count"] = c.counts;
    if (c.T)
        j["T"] = *c.T;
    j["d"] = c.d;
    j["s"] = c.s;
    j["y"] = c.y;
    j["samples"] = c.samples;
    j["a"] = c.a;
    j["b"] = c.b;
    j["p"] = c.p;
    j["extrapolated"] = c.extrapolated;
    j["output"] = c.output;
    j["format"] = c.format;
    j["workers"] = c.workers;
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    return j;
}

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string cell_text(const Report::Cell& c)
{
    if (const auto* d = std::get_if<double>(&c))
        return format_double(*d);
    if (const auto* i = std::get_if<std::int64_t>(&c))
        return std::to_string(*i);
    return std::get<std::string>(c);
}

ordered_json cell_json(const Report::Cell& c)
{
    if (const auto* d = std::get_if<double>(&c)) {
        if (!std::isfinite(*d))
            return format_double(*d);
        return *d;
    }
    if (const auto* i = std::get_if<std::int64_t>(&c))
        return *i;
    return std::get<std::string>(c);
}

std::uint32_t file_crc32(const std::filesystem::path& path, std::uint64_t& bytes)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw UsageError("cannot read " + path.string());
    uLong crc = crc32(0L, Z_NULL, 0);
    std::vector<char> buf(1 << 16);
    bytes = 0;
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = in.gcount();
        if (got <= 0)
            break;
        crc = crc32(crc, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(got));
        bytes += static_cast<std::uint64_t>(got);
    }
    return static_cast<std::uint32_t>(crc);
}

std::uint32_t series_crc32(const ConvolutionSeries& s)
{
    const auto v = s.values();
    return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(v.data()),
                                            static_cast<uInt>(v.size_bytes())));
}

Complex parse_complex(const std::string& text)
{
    const auto comma = text.find(',');
    try {
        std::size_t used = 0;
        if (comma == std::string::npos) {
            const double re = std::stod(text, &used);
            if (used != text.size())
                throw std::invalid_argument(text);
            return {re, 0.0};
        }
        const std::string a = text.substr(0, comma);
        const std::string b = text.substr(comma + 1);
        const double re = std::stod(a, &used);
        if (used != a.size())
            throw std::invalid_argument(text);
        const double im = std::stod(b, &used);
        if (used != b.size())
            throw std::invalid_argument(text);
        return {re, im};
    } catch (const std::logic_error&) {
        throw UsageError("malformed complex value '" + text + "' (expected \"re\" or \"re,im\")");
    }
}

double median(std::vector<double> v)
{
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double max_of(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v)
        m = std::max(m, x);
    return m;
}

// ---------------------------------------------------------------------------
// Shared verification plumbing

struct Context {
    const RunConfig& cfg;
    std::ostream& out;
    std::ostream& err;
    std::vector<std::filesystem::path> inputs;
    bool invariant_failed = false;
    std::vector<std::string> failures;

    void fail(const std::string& what)
    {
        invariant_failed = true;
        failures.push_back(what);
    }
};

ZeroSet load_zeros(Context& ctx)
{
    if (ctx.cfg.zeros.empty())
        throw UsageError("verify " + ctx.cfg.target + " needs --zeros");
    const std::filesystem::path path(ctx.cfg.zeros);
    if (!std::filesystem::exists(path))
        throw UsageError("zeros file not found: " + path.string());
    ctx.inputs.push_back(path);
    EnrichOptions opts;
    opts.workers = ctx.cfg.workers;
    return load_zero_set(path, opts);
}

std::vector<double> truncations(const RunConfig& cfg, const ZeroSet& zs)
{
    if (cfg.T) {
        if (*cfg.T > zs.t_max() && *cfg.T > kFirstOrdinateFloor)
            throw UsageError("--T " + format_double(*cfg.T) + " exceeds the largest loaded ordinate "
                             + format_double(zs.t_max()));
        return {*cfg.T};
    }
    if (cfg.counts.empty())
        return {zs.t_max()};
    std::vector<double> out;
    for (auto k : cfg.counts) {
        if (k > zs.size())
            throw UsageError("--count " + std::to_string(k) + " exceeds the " + std::to_string(zs.size())
                             + " loaded zeros");
        out.push_back(zs.truncation_for_count(k));
    }
    return out;
}

std::vector<double> samples_or(const RunConfig& cfg, const std::string& fallback)
{
    return parse_samples(cfg.samples.empty() ? fallback : cfg.samples);
}

std::uint64_t required_limit(const RunConfig& cfg, double need)
{
    const auto want = static_cast<std::uint64_t>(std::ceil(need));
    if (cfg.limit == 0)
        return std::max<std::uint64_t>(want, 2);
    if (cfg.limit < want)
        throw UsageError("--limit " + std::to_string(cfg.limit) + " is below the required "
                         + std::to_string(want));
    return cfg.limit;
}

std::vector<std::string> breakdown_columns(const std::string& axis, bool complex_columns)
{
    std::vector<std::string> c = {axis,       "direct",   "main",     "single",     "double",    "total",
                                  "residual", "envelope", "T",        "zeros_used", "pair_terms"};
    if (complex_columns)
        for (const char* n : {"direct_im", "main_im", "single_im", "double_im", "total_im"})
            c.push_back(n);
    return c;
}

std::vector<Report::Cell> breakdown_row(double axis, Complex direct, const ExplicitBreakdown& b,
                                        bool complex_columns)
{
    std::vector<Report::Cell> r = {axis,
                                   direct.real(),
                                   b.main_term.real(),
                                   b.single_sum.real(),
                                   b.double_sum.real(),
                                   b.total.real(),
                                   std::abs(direct - (complex_columns ? b.total : Complex{b.total.real(), 0.0})),
                                   b.envelope,
                                   b.truncation_T,
                                   static_cast<std::int64_t>(b.zeros_used),
                                   static_cast<std::int64_t>(b.pair_terms)};
    if (complex_columns)
        for (Complex z : {direct, b.main_term, b.single_sum, b.double_sum, b.total})
            r.push_back(z.imag());
    return r;
}

void check_breakdown(Context& ctx, const std::string& where, const ExplicitBreakdown& b)
{
    if (b.total != b.main_term + b.single_sum + b.double_sum)
        ctx.fail(where + ": total differs from main + single + double");
    if (b.real_valued && !(b.imag_residue < 1e-8 * (1.0 + std::abs(b.total))))
        ctx.fail(where + ": imaginary residue " + format_double(b.imag_residue));
}

std::string verdict(bool ok)
{
    return ok ? "yes" : "no";
}

// ---------------------------------------------------------------------------
// verify targets

Report verify_summatory(Context& ctx, Kind kind)
{
    const auto& cfg = ctx.cfg;
    const auto xs = samples_or(cfg, "log:50:10:10000");
    const double xmax = *std::max_element(xs.begin(), xs.end());
    const auto zs = load_zeros(ctx);
    const auto Ts = truncations(cfg, zs);
    SieveOptions sopt;
    sopt.workers = cfg.workers;
    const auto table = build_sieve(kind, required_limit(cfg, xmax), sopt);
    ExplicitOptions eopt;
    eopt.workers = cfg.workers;

    Report rep;
    rep.columns = breakdown_columns("x", false);
    std::vector<double> medians;
    for (double T : Ts) {
        const auto e = ZeroExpansion::summatory(kind, zs, T);
        std::vector<double> res;
        for (double x : xs) {
            auto b = e.at(x, eopt);
            b.envelope = 1.0 + x * (std::abs(std::log(x)) + 1.0) / T;
            check_breakdown(ctx, "x=" + format_double(x), b);
            const double direct = static_cast<double>(table.summatory(x));
            rep.rows.push_back(breakdown_row(x, direct, b, false));
            res.push_back(std::abs(direct - b.total.real()));
        }
        medians.push_back(median(res));
        const std::string tag = "zeros_" + std::to_string(e.zeros_used());
        rep.summary.emplace_back(tag + "_median_residual", medians.back());
        rep.summary.emplace_back(tag + "_max_residual", max_of(res));
    }
    bool decreasing = true;
    for (std::size_t i = 1; i < medians.size(); ++i)
        decreasing = decreasing && medians[i] < medians[i - 1];
    if (medians.size() > 1)
        rep.summary.emplace_back("median_strictly_decreasing", verdict(decreasing));
    return rep;
}

Report verify_cesaro(Context& ctx, Kind kind, int d, bool extrapolated)
{
    const auto& cfg = ctx.cfg;
    const auto xs = samples_or(cfg, "list:1e3,1e4,1e5,1e6");
    const double xmax = *std::max_element(xs.begin(), xs.end());
    const auto zs = load_zeros(ctx);
    const auto Ts = truncations(cfg, zs);
    SieveOptions sopt;
    sopt.workers = cfg.workers;
    const auto limit = required_limit(cfg, xmax);
    const auto table = build_sieve(kind, limit, sopt);
    const auto series = convolve(table, d, limit);
    ExplicitOptions eopt;
    eopt.workers = cfg.workers;

    Report rep;
    rep.columns = breakdown_columns("x", false);
    const double dd = d;
    std::vector<double> scaled;
    std::vector<double> ratio;
    std::uint64_t pruned = 0;
    for (double T : Ts) {
        const CesaroExplicit ce(kind, d, zs, T, eopt, extrapolated);
        pruned += ce.expansion().pruned_terms();
        for (double x : xs) {
            const auto b = ce(x);
            check_breakdown(ctx, "x=" + format_double(x), b);
            const double direct = cesaro_sum(series, x);
            rep.rows.push_back(breakdown_row(x, direct, b, false));
            scaled.push_back(std::abs(direct - b.total.real()) / std::pow(x, dd - 0.5));
            ratio.push_back(direct / std::pow(x, dd));
        }
    }
    rep.summary.emplace_back("max_residual_over_x^(d-1/2)", max_of(scaled));
    rep.summary.emplace_back("median_residual_over_x^(d-1/2)", median(scaled));
    double mean = 0.0;
    for (double r : ratio)
        mean += r;
    mean /= static_cast<double>(ratio.size());
    rep.summary.emplace_back("mean_direct_over_x^d", mean);
    if (kind == Kind::liouville) {
        const double z = zeta_half();
        rep.summary.emplace_back("main_coefficient", kPi / (4.0 * z * z) / std::tgamma(dd + 1.0));
    }
    rep.summary.emplace_back("pruned_terms", static_cast<std::int64_t>(pruned));
    return rep;
}

Report verify_dirichlet(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    const Kind kind = parse_kind(cfg.kind);
    const Complex s = parse_complex(cfg.s);
    const auto zs = load_zeros(ctx);
    const auto Ts = truncations(cfg, zs);
    const auto limit = cfg.limit == 0 ? std::uint64_t{10000} : cfg.limit;
    SieveOptions sopt;
    sopt.workers = cfg.workers;
    const auto table = build_sieve(kind, limit, sopt);
    const auto series = convolve(table, 2, limit);
    ExplicitOptions eopt;
    eopt.workers = cfg.workers;

    Report rep;
    rep.columns = breakdown_columns("s", true);
    const Complex direct = dirichlet_direct(series, s, limit);
    for (double T : Ts) {
        const auto b = dirichlet_explicit(kind, s, zs, T, eopt);
        check_breakdown(ctx, "s", b);
        rep.rows.push_back(breakdown_row(s.real(), direct, b, true));
        rep.summary.emplace_back("zeros_" + std::to_string(b.zeros_used) + "_abs_single", std::abs(b.single_sum));
        rep.summary.emplace_back("zeros_" + std::to_string(b.zeros_used) + "_abs_double", std::abs(b.double_sum));
    }
    const auto ps = dirichlet_partial_summation(table, series, s, static_cast<double>(limit));
    rep.summary.emplace_back("s_im", s.imag());
    rep.summary.emplace_back("partial_summation_re", ps.total.real());
    rep.summary.emplace_back("partial_summation_im", ps.total.imag());
    rep.summary.emplace_back("partial_summation_residual", std::abs(direct - ps.total));
    return rep;
}

Report verify_exponential(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    const Kind kind = parse_kind(cfg.kind);
    const std::vector<double> ys = cfg.y.empty() ? std::vector<double>{0.1, 0.05, 0.02, 0.01} : cfg.y;
    const double ymin = *std::min_element(ys.begin(), ys.end());
    if (!(ymin > 0.0))
        throw UsageError("--y values must be positive");
    const auto zs = load_zeros(ctx);
    const auto Ts = truncations(cfg, zs);
    const auto limit = required_limit(cfg, 20.0 / ymin);
    SieveOptions sopt;
    sopt.workers = cfg.workers;
    const auto table = build_sieve(kind, limit, sopt);
    const auto series = convolve(table, 2, limit);
    ExplicitOptions eopt;
    eopt.workers = cfg.workers;

    Report rep;
    rep.columns = breakdown_columns("y", false);
    const double z = zeta_half();
    const double lead = kPi / (4.0 * z * z);
    std::vector<double> dev;
    for (double y : ys) {
        const double direct = exponential_direct(series, y, limit);
        dev.push_back(std::abs(y * direct - (kind == Kind::liouville ? lead : 0.0)));
        for (double T : Ts) {
            const auto b = exponential_explicit(kind, y, zs, T, eopt);
            check_breakdown(ctx, "y=" + format_double(y), b);
            const Complex f = exponential_factor(kind, y, zs, T, eopt);
            if (!(std::abs(b.double_sum - f * f) <= 1e-12 * (1.0 + std::abs(f * f))))
                ctx.fail("y=" + format_double(y) + ": double term is not the square of the factor");
            rep.rows.push_back(breakdown_row(y, direct, b, false));
        }
    }
    for (std::size_t i = 0; i < ys.size(); ++i)
        rep.summary.emplace_back("y_" + format_double(ys[i]) + "_scaled_deviation", dev[i]);
    bool decreasing = true;
    for (std::size_t i = 1; i < dev.size(); ++i)
        decreasing = decreasing && dev[i] < dev[i - 1];
    rep.summary.emplace_back("scaled_deviation_decreasing", verdict(decreasing));
    return rep;
}

Report verify_weighted(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    const Kind kind = parse_kind(cfg.kind);
    const auto etas = samples_or(cfg, "list:1e3,1e4,1e5");
    const double emax = *std::max_element(etas.begin(), etas.end());
    const auto zs = load_zeros(ctx);
    const auto Ts = truncations(cfg, zs);
    const auto limit = required_limit(cfg, emax * cfg.b + 1.0);
    SieveOptions sopt;
    sopt.workers = cfg.workers;
    const auto table = build_sieve(kind, limit, sopt);
    ExplicitOptions eopt;
    eopt.workers = cfg.workers;

    Report rep;
    rep.columns = breakdown_columns("eta", false);
    std::vector<double> rel;
    for (double eta : etas) {
        const auto w = polynomial_weight(cfg.a, cfg.b, eta, cfg.p);
        const Complex direct = weighted_average_direct(w, table, cfg.d);
        for (double T : Ts) {
            const auto b = weighted_explicit(kind, w, zs, T, cfg.d, &table, eopt);
            check_breakdown(ctx, "eta=" + format_double(eta), b);
            rep.rows.push_back(breakdown_row(eta, direct, b, false));
            rel.push_back(std::abs(direct - b.total) / b.envelope);
        }
    }
    rep.summary.emplace_back("max_residual_over_envelope", max_of(rel));
    return rep;
}

Report verify_identity(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    if (cfg.trials < 0)
        throw UsageError("--trials must be positive");
    const int trials = cfg.trials == 0 ? 20 : cfg.trials;
    if (cfg.d < 2 || cfg.d > 3)
        throw UsageError("verify identity supports --d 2 or 3");
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    constexpr double kMaxEtaB = 1500.0;
    SieveOptions sopt;
    sopt.workers = cfg.workers;
    const auto lambda = build_sieve(Kind::liouville, static_cast<std::uint64_t>(kMaxEtaB) + 2, sopt);
    const auto mu = build_sieve(Kind::moebius, static_cast<std::uint64_t>(kMaxEtaB) + 2, sopt);

    Report rep;
    rep.columns = {"trial", "kind", "d", "a", "b", "eta", "p", "direct", "boundary", "bulk", "rhs", "residual"};
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        const Kind kind = t % 2 == 0 ? Kind::liouville : Kind::moebius;
        const bool extra = (t / 2) % 2 == 1;
        const double eta = 1.0 + 39.0 * unit(rng);
        const double a = extra ? (1.0 + 8.0 * unit(rng)) / eta : 0.95 * unit(rng) / eta;
        const double span = (20.0 + 400.0 * unit(rng)) / eta;
        const double b = std::min(a + span, kMaxEtaB / eta);
        const int p = 2 + static_cast<int>(3.0 * unit(rng));
        const auto w = polynomial_weight(a, b, eta, p);
        const auto& table = kind == Kind::liouville ? lambda : mu;
        const Complex direct = weighted_average_direct(w, table, cfg.d);
        const auto rhs = weighted_identity_rhs(w, table, cfg.d);
        const double resid = std::abs(direct - rhs.total) / std::max(1.0, std::abs(direct));
        worst = std::max(worst, resid);
        if (!(resid < 1e-8))
            ctx.fail("identity trial " + std::to_string(t) + " relative residual " + format_double(resid));
        rep.rows.push_back({static_cast<std::int64_t>(t), std::string(kind_name(kind)),
                            static_cast<std::int64_t>(cfg.d), a, b, eta, static_cast<std::int64_t>(p),
                            direct.real(), rhs.boundary.real(), rhs.bulk.real(), rhs.total.real(), resid});
    }
    rep.summary.emplace_back("max_relative_residual", worst);
    rep.summary.emplace_back("tolerance", 1e-8);
    return rep;
}

Report run_verify(Context& ctx)
{
    const auto& t = ctx.cfg.target;
    if (t == "L")
        return verify_summatory(ctx, Kind::liouville);
    if (t == "M")
        return verify_summatory(ctx, Kind::moebius);
    if (t == "cesaro")
        return verify_cesaro(ctx, Kind::liouville, 2, false);
    if (t == "cesaro-mu")
        return verify_cesaro(ctx, Kind::moebius, 2, false);
    if (t == "dfold")
        return verify_cesaro(ctx, parse_kind(ctx.cfg.kind), ctx.cfg.d, ctx.cfg.extrapolated);
    if (t == "dirichlet")
        return verify_dirichlet(ctx);
    if (t == "exponential")
        return verify_exponential(ctx);
    if (t == "weighted")
        return verify_weighted(ctx);
    if (t == "identity")
        return verify_identity(ctx);
    throw UsageError("unknown verify target '" + t + "'");
}

// ---------------------------------------------------------------------------
// Other commands

template <class Fn>
double best_time(int trials, Fn&& fn)
{
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < std::max(1, trials); ++i) {
        const auto t0 = Clock::now();
        fn();
        best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
    }
    return best;
}

Report run_bench(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    const std::uint64_t n = cfg.limit == 0 ? (std::uint64_t{1} << 18) : cfg.limit;
    if ((n & (n - 1)) != 0)
        throw UsageError("bench needs a power-of-two --limit");
    const Kind kind = parse_kind(cfg.kind);
    SieveOptions sopt;
    sopt.workers = cfg.workers;
    std::optional<SieveTable> table;
    if (cfg.trials < 0)
        throw UsageError("--trials must be positive");
    const int trials = cfg.trials == 0 ? 3 : cfg.trials;
    const double sieve_time = best_time(trials, [&] { table.emplace(build_sieve(kind, n, sopt)); });
    std::optional<ConvolutionSeries> naive;
    std::optional<ConvolutionSeries> fft;
    const double naive_time = best_time(trials, [&] { naive.emplace(convolve_naive(*table, cfg.d, n)); });
    const double fft_time = best_time(trials, [&] { fft.emplace(convolve_fft(*table, cfg.d, n)); });
    const bool equal = *naive == *fft;
    if (!equal)
        ctx.fail("FFT output differs from the naive convolution");

    Report rep;
    rep.columns = {"metric", "value"};
    rep.rows.push_back({std::string("limit"), static_cast<std::int64_t>(n)});
    rep.rows.push_back({std::string("d"), static_cast<std::int64_t>(cfg.d)});
    rep.rows.push_back({std::string("sieve_seconds"), sieve_time});
    rep.rows.push_back({std::string("sieve_values_per_second"), static_cast<double>(n) / sieve_time});
    rep.rows.push_back({std::string("naive_seconds"), naive_time});
    rep.rows.push_back({std::string("fft_seconds"), fft_time});
    rep.rows.push_back({std::string("fft_size"), static_cast<std::int64_t>(fft_size(cfg.d, n))});
    rep.summary.emplace_back("speedup", naive_time / fft_time);
    rep.summary.emplace_back("naive_crc32", static_cast<std::int64_t>(series_crc32(*naive)));
    rep.summary.emplace_back("fft_crc32", static_cast<std::int64_t>(series_crc32(*fft)));
    rep.summary.emplace_back("outputs_equal", verdict(equal));
    rep.summary.emplace_back("hardware_threads", static_cast<std::int64_t>(std::thread::hardware_concurrency()));
    return rep;
}

Report run_sieve(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    if (cfg.limit == 0)
        throw UsageError("sieve needs --limit");
    if (cfg.output.empty())
        throw UsageError("sieve needs --output for the table file");
    const Kind kind = parse_kind(cfg.kind);
    SieveOptions sopt;
    sopt.workers = cfg.workers;
    const auto t0 = Clock::now();
    const auto table = build_sieve(kind, cfg.limit, sopt);
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    save_table(table, cfg.output);
    Report rep;
    rep.summary.emplace_back("kind", std::string(kind_name(kind)));
    rep.summary.emplace_back("limit", static_cast<std::int64_t>(table.limit()));
    rep.summary.emplace_back("summatory_at_limit", table.summatory_at(table.limit()));
    rep.summary.emplace_back("seconds", secs);
    return rep;
}

Report run_convolve(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    if (cfg.limit == 0)
        throw UsageError("convolve needs --limit");
    if (cfg.d < 2)
        throw UsageError("--d must be at least 2");
    const Kind kind = parse_kind(cfg.kind);
    SieveOptions sopt;
    sopt.workers = cfg.workers;
    const auto table = build_sieve(kind, cfg.limit, sopt);
    const auto series = convolve(table, cfg.d, cfg.limit);
    Report rep;
    rep.columns = {"n", "value"};
    for (std::uint64_t n = static_cast<std::uint64_t>(cfg.d); n <= series.limit(); ++n)
        rep.rows.push_back({static_cast<std::int64_t>(n), series[n]});
    std::int64_t peak = 0;
    bool bounded = true;
    std::string equality_at;
    for (std::uint64_t n = 2; n <= series.limit(); ++n) {
        const std::int64_t v = std::abs(series[n]);
        peak = std::max(peak, v);
        if (cfg.d != 2)
            continue;
        if (v > static_cast<std::int64_t>(n) - 1)
            bounded = false;
        else if (v == static_cast<std::int64_t>(n) - 1)
            equality_at += (equality_at.empty() ? "" : " ") + std::to_string(n);
    }
    if (cfg.d == 2) {
        // n - 1 counts the compositions, so exceeding it is a computation error.
        // The strict bound holds except at a few small n, which are listed.
        rep.summary.emplace_back("abs_S_at_most_n_minus_1", verdict(bounded));
        rep.summary.emplace_back("abs_S_equals_n_minus_1_at", equality_at.empty() ? std::string("none") : equality_at);
        if (!bounded)
            ctx.fail("|S(n)| <= n - 1 violated");
    }
    rep.summary.emplace_back("max_abs_value", peak);
    rep.summary.emplace_back("crc32", static_cast<std::int64_t>(series_crc32(series)));
    return rep;
}

Report run_zeros_enrich(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    if (cfg.zeros.empty())
        throw UsageError("zeros-enrich needs --zeros");
    if (cfg.output.empty())
        throw UsageError("zeros-enrich needs --output for the cache file");
    const auto zs = load_zeros(ctx);
    save_cache(zs, cfg.output);
    if (!cfg.csv.empty()) {
        std::ofstream csv(cfg.csv);
        if (!csv)
            throw UsageError("cannot write " + cfg.csv);
        write_zero_csv(zs, csv);
    }
    Report rep;
    rep.summary.emplace_back("zeros", static_cast<std::int64_t>(zs.size()));
    rep.summary.emplace_back("t_max", zs.t_max());
    rep.summary.emplace_back("count_estimate", zero_count_estimate(zs.t_max()));
    if (!zs.empty()) {
        const auto sz = sz_diagnostic(zs, zs.t_max());
        rep.summary.emplace_back("sum_inv_abs_zprime", sz.sum_inv_zp);
        rep.summary.emplace_back("normalized_sum", sz.normalized);
    }
    return rep;
}

void write_manifest(const Context& ctx, const std::vector<std::string>& args,
                    const std::filesystem::path& path, double seconds, int status)
{
    ordered_json m;
    m["tool"] = "liouconv";
    m["version"] = kVersion;
    ordered_json argv = ordered_json::array();
    for (const auto& a : args)
        argv.push_back(a);
    m["arguments"] = argv;
    m["config"] = config_json(ctx.cfg);
    ordered_json inputs = ordered_json::array();
    auto add_input = [&](const std::filesystem::path& p) {
        std::uint64_t bytes = 0;
        const auto crc = file_crc32(p, bytes);
        char hex[16];
        std::snprintf(hex, sizeof hex, "%08x", crc);
        inputs.push_back({{"path", p.string()}, {"bytes", bytes}, {"crc32", hex}});
    };
    for (const auto& p : ctx.inputs)
        add_input(p);
    if (!ctx.cfg.config_path.empty())
        add_input(ctx.cfg.config_path);
    m["inputs"] = inputs;
    ordered_json versions;
    versions["compiler"] = __VERSION__;
    versions["cplusplus"] = static_cast<long>(__cplusplus);
    versions["fftw"] = std::string(fftw_version);
    versions["boost"] = BOOST_LIB_VERSION;
    versions["zlib"] = zlibVersion();
    versions["cli11"] = CLI11_VERSION;
    versions["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "."
                                + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "."
                                + std::to_string(NLOHMANN_JSON_VERSION_PATCH);
    m["versions"] = versions;
    m["workers"] = ctx.cfg.workers;
    m["deterministic_across_workers"] = true;
    m["elapsed_seconds"] = seconds;
    m["exit_status"] = status;
    m["invariant_failures"] = ctx.failures;
    std::ofstream out(path);
    if (!out)
        throw UsageError("cannot write manifest " + path.string());
    out << m.dump(2) << '\n';
}

} // namespace

std::vector<double> parse_samples(const std::string& spec)
{
    auto bad = [&](const std::string& why) {
        return UsageError("malformed --samples '" + spec + "': " + why);
    };
    auto number = [&](const std::string& t) {
        try {
            std::size_t used = 0;
            const double v = std::stod(t, &used);
            if (used != t.size() || !std::isfinite(v))
                throw bad("'" + t + "' is not a number");
            return v;
        } catch (const std::logic_error&) {
            throw bad("'" + t + "' is not a number");
        }
    };
    std::vector<std::string> parts;
    {
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ':'))
            parts.push_back(item);
    }
    std::vector<double> out;
    if (parts.size() == 1) {
        out.push_back(number(parts[0]));
    } else if (parts[0] == "list" && parts.size() == 2) {
        std::stringstream ss(parts[1]);
        std::string item;
        while (std::getline(ss, item, ','))
            out.push_back(number(item));
    } else if ((parts[0] == "log" || parts[0] == "lin") && parts.size() == 4) {
        const double count = number(parts[1]);
        const double lo = number(parts[2]);
        const double hi = number(parts[3]);
        if (count < 1 || count != std::floor(count))
            throw bad("count must be a positive integer");
        if (!(lo <= hi))
            throw bad("need lo <= hi");
        if (parts[0] == "log" && !(lo > 0.0))
            throw bad("log grid needs lo > 0");
        const auto n = static_cast<std::size_t>(count);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
            out.push_back(parts[0] == "log" ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)))
                                            : lo + t * (hi - lo));
        }
        out.front() = lo;
        if (n > 1)
            out.back() = hi;
    } else {
        throw bad("expected log:COUNT:LO:HI, lin:COUNT:LO:HI or list:V1,V2,...");
    }
    if (out.empty())
        throw bad("no sample points");
    for (double v : out)
        if (!(v > 0.0))
            throw bad("sample points must be positive");
    return out;
}

void write_csv(const Report& report, std::ostream& out)
{
    if (!report.columns.empty()) {
        for (std::size_t i = 0; i < report.columns.size(); ++i)
            out << (i ? "," : "") << report.columns[i];
        out << '\n';
    }
    for (const auto& row : report.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << cell_text(row[i]);
        out << '\n';
    }
    for (const auto& [key, value] : report.summary)
        out << "# " << key << ',' << cell_text(value) << '\n';
}

void write_json(const Report& report, std::ostream& out)
{
    ordered_json j;
    j["columns"] = report.columns;
    ordered_json rows = ordered_json::array();
    for (const auto& row : report.rows) {
        ordered_json r;
        for (std::size_t i = 0; i < row.size() && i < report.columns.size(); ++i)
            r[report.columns[i]] = cell_json(row[i]);
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    ordered_json summary = ordered_json::object();
    for (const auto& [key, value] : report.summary)
        summary[key] = cell_json(value);
    j["summary"] = std::move(summary);
    out << j.dump(2) << '\n';
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    RunConfig cfg;
    std::string count_text;
    double T_value = 0.0;

    CLI::App app{"Liouville / Moebius convolution sums and their explicit formulas", "liouconv"};
    app.set_config("--config", "", "key=value configuration file (flags take precedence)");
    // Commas belong to option values (sample lists, "re,im"), not to the config syntax.
    auto config_format = std::make_shared<CLI::ConfigBase>();
    config_format->arrayDelimiter(';');
    app.config_formatter(config_format);
    app.require_subcommand(1);
    app.fallthrough();

    app.add_option("--kind", cfg.kind, "liouville or moebius")->capture_default_str();
    app.add_option("--limit", cfg.limit, "sieve / series limit N (0 derives it from the samples)")
        ->capture_default_str();
    app.add_option("--zeros", cfg.zeros, "zero ordinates (text) or enriched cache");
    auto* count_opt = app.add_option("--count", cfg.counts, "number(s) of zeros to use, comma separated")
                          ->delimiter(',');
    auto* T_opt = app.add_option("--T", T_value, "truncation height (zeros with gamma < T)");
    count_opt->excludes(T_opt);
    app.add_option("--d", cfg.d, "number of convolution factors")->capture_default_str();
    app.add_option("--s", cfg.s, "Dirichlet variable, \"re\" or \"re,im\"")->capture_default_str();
    app.add_option("--y", cfg.y, "exponential parameters, comma separated")->delimiter(',');
    app.add_option("--samples", cfg.samples, "log:COUNT:LO:HI | lin:COUNT:LO:HI | list:V1,V2,...");
    app.add_option("--a", cfg.a, "weight support start")->capture_default_str();
    app.add_option("--b", cfg.b, "weight support end")->capture_default_str();
    app.add_option("--p", cfg.p, "polynomial weight exponent, f(w) = (b - w)^p")->capture_default_str();
    app.add_flag("--extrapolated", cfg.extrapolated, "allow the Moebius d-fold formula for d != 2");
    app.add_option("--output", cfg.output, "report (or table / cache) path; stdout when omitted");
    app.add_option("--csv", cfg.csv, "zeros-enrich: also write the enriched zeros as CSV");
    app.add_option("--format", cfg.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    app.add_option("--workers", cfg.workers, "worker threads")
        ->check(CLI::Range(1u, 1024u))
        ->capture_default_str();
    app.add_option("--trials", cfg.trials, "identity trials (default 20) / bench repetitions (default 3)");
    app.add_option("--seed", cfg.seed, "random seed for identity trials")->capture_default_str();

    auto* sieve_cmd = app.add_subcommand("sieve", "build and save a lambda or mu table");
    auto* convolve_cmd = app.add_subcommand("convolve", "write S_d(n) as CSV");
    auto* enrich_cmd = app.add_subcommand("zeros-enrich", "verify ordinates and write a zero cache");
    auto* verify_cmd = app.add_subcommand("verify", "compare direct sums with explicit formulas");
    verify_cmd->add_option("target", cfg.target, "L | M | cesaro | cesaro-mu | dfold | dirichlet | "
                                                 "exponential | weighted | identity")
        ->required()
        ->check(CLI::IsMember(
            {"L", "M", "cesaro", "cesaro-mu", "dfold", "dirichlet", "exponential", "weighted", "identity"}));
    auto* bench_cmd = app.add_subcommand("bench", "time naive vs FFT convolution and the sieve");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsageError;
    }
    if (T_opt->count() > 0)
        cfg.T = T_value;
    if (auto* cfg_opt = app.get_config_ptr(); cfg_opt != nullptr && cfg_opt->count() > 0)
        cfg.config_path = cfg_opt->as<std::string>();

    if (sieve_cmd->parsed())
        cfg.command = "sieve";
    else if (convolve_cmd->parsed())
        cfg.command = "convolve";
    else if (enrich_cmd->parsed())
        cfg.command = "zeros-enrich";
    else if (verify_cmd->parsed())
        cfg.command = "verify";
    else if (bench_cmd->parsed())
        cfg.command = "bench";

    Context ctx{cfg, out, err, {}, false, {}};
    const auto t0 = Clock::now();
    int status = kOk;
    try {
        Report rep;
        if (cfg.command == "sieve")
            rep = run_sieve(ctx);
        else if (cfg.command == "convolve")
            rep = run_convolve(ctx);
        else if (cfg.command == "zeros-enrich")
            rep = run_zeros_enrich(ctx);
        else if (cfg.command == "verify")
            rep = run_verify(ctx);
        else
            rep = run_bench(ctx);

        const bool report_to_file = !cfg.output.empty() && cfg.command != "sieve" && cfg.command != "zeros-enrich";
        if (report_to_file) {
            std::ofstream file(cfg.output);
            if (!file)
                throw UsageError("cannot write " + cfg.output);
            cfg.format == "json" ? write_json(rep, file) : write_csv(rep, file);
            if (!file)
                throw UsageError("error while writing " + cfg.output);
        } else if (cfg.command == "sieve" || cfg.command == "zeros-enrich") {
            write_csv(rep, out);
        } else {
            cfg.format == "json" ? write_json(rep, out) : write_csv(rep, out);
        }
        for (const auto& f : ctx.failures)
            err << "invariant failure: " << f << '\n';
        status = ctx.invariant_failed ? kInvariantFailure : kOk;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        status = kUsageError;
    } catch (const ZeroFormatError& e) {
        err << "error: " << e.what() << '\n';
        status = kUsageError;
    } catch (const ZeroResidualError& e) {
        err << "error: " << e.what() << '\n';
        status = kUsageError;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << '\n';
        status = kUsageError;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        status = kUsageError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        status = kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        status = kInvariantFailure;
    }

    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const std::filesystem::path manifest =
        cfg.output.empty() ? std::filesystem::path("liouconv-" + cfg.command + ".manifest.json")
                           : std::filesystem::path(cfg.output + ".manifest.json");
    try {
        write_manifest(ctx, args, manifest, secs, status);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        if (status == kOk)
            status = kUsageError;
    }
    return status;
}

int run_main(int argc, char** argv)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i)
        args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

} // namespace liouconv::cli
