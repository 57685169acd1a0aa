#include "liouconv/zeros.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string_view>

namespace liouconv {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == ','))
            ++i;
        if (i >= s.size())
            break;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != ',')
            ++j;
        out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view text, T& out)
{
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

std::string describe(std::uint64_t index, double gamma)
{
    std::ostringstream os;
    os << "zero #" << index << " (gamma = " << std::setprecision(17) << gamma << ")";
    return os.str();
}

ZetaPair default_evaluator(Complex s)
{
    return zeta_with_derivative(s);
}

constexpr std::array<char, 8> kCacheMagic = {'L', 'Z', 'C', 'A', 'C', 'H', 'E', '\0'};
constexpr std::uint32_t kCacheVersion = 1;
constexpr std::size_t kHeaderBytes = 32;
constexpr std::size_t kRecordBytes = 48;

template <typename T>
void put(std::vector<unsigned char>& buf, T value)
{
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    buf.insert(buf.end(), raw, raw + sizeof(T));
}

template <typename T>
T get(const unsigned char* p)
{
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

std::uint32_t checksum(const unsigned char* data, std::size_t size)
{
    uLong crc = crc32(0L, Z_NULL, 0);
    while (size > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
        crc = crc32(crc, data, chunk);
        data += chunk;
        size -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

} // namespace

std::vector<Ordinate> load_ordinates(std::istream& in)
{
    std::vector<Ordinate> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (const auto hash = view.find('#'); hash != std::string_view::npos)
            view = view.substr(0, hash);
        view = trim(view);
        if (view.empty())
            continue;
        const auto fields = split_fields(view);
        Ordinate z{out.empty() ? 1 : out.back().index + 1, 0.0};
        std::string_view gamma_text;
        if (fields.size() == 1) {
            gamma_text = fields[0];
        } else if (fields.size() == 2) {
            if (!parse_number(fields[0], z.index))
                throw ZeroFormatError("line " + std::to_string(line_no) + ": bad index '"
                                          + std::string(fields[0]) + "'",
                                      line_no);
            gamma_text = fields[1];
        } else {
            throw ZeroFormatError("line " + std::to_string(line_no)
                                      + ": expected an ordinate, optionally preceded by an index",
                                  line_no);
        }
        if (!parse_number(gamma_text, z.gamma) || !std::isfinite(z.gamma))
            throw ZeroFormatError("line " + std::to_string(line_no) + ": cannot parse ordinate '"
                                      + std::string(gamma_text) + "'",
                                  line_no);
        if (z.gamma <= 0.0)
            throw ZeroFormatError("line " + std::to_string(line_no) + ": ordinate must be positive",
                                  line_no);
        if (!out.empty()) {
            if (z.gamma <= out.back().gamma)
                throw ZeroFormatError("line " + std::to_string(line_no) + ": non-monotone ordinate",
                                      line_no);
            if (z.index != out.back().index + 1)
                throw ZeroFormatError("line " + std::to_string(line_no) + ": index "
                                          + std::to_string(z.index) + " does not follow "
                                          + std::to_string(out.back().index),
                                      line_no);
        } else if (z.index == 0) {
            throw ZeroFormatError("line " + std::to_string(line_no) + ": indices start at 1",
                                  line_no);
        }
        out.push_back(z);
    }
    return out;
}

std::vector<Ordinate> load_ordinates(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ZeroFormatError("cannot open zeros file " + path.string());
    try {
        return load_ordinates(in);
    } catch (const ZeroFormatError& e) {
        throw ZeroFormatError(path.string() + ": " + e.what(), e.line());
    }
}

ZeroSet::ZeroSet(std::vector<ZeroDatum> zeros, double tolerance)
    : zeros_(std::move(zeros)), tolerance_(tolerance)
{
    if (!(tolerance_ > 0.0))
        throw std::invalid_argument("ZeroSet: residual tolerance must be positive");
    for (std::size_t i = 0; i < zeros_.size(); ++i) {
        const auto& z = zeros_[i];
        if (!(z.gamma > kFirstOrdinateFloor) || !std::isfinite(z.gamma))
            throw std::invalid_argument("ZeroSet: " + describe(z.index, z.gamma)
                                        + " is not above 14");
        if (i > 0) {
            if (z.gamma <= zeros_[i - 1].gamma)
                throw std::invalid_argument("ZeroSet: ordinates not strictly increasing at "
                                            + describe(z.index, z.gamma));
            if (z.index != zeros_[i - 1].index + 1)
                throw std::invalid_argument("ZeroSet: index gap before " + describe(z.index, z.gamma));
        } else if (z.index != 1) {
            throw std::invalid_argument("ZeroSet: the first zero must have index 1");
        }
    }
}

std::span<const ZeroDatum> ZeroSet::window(double T) const
{
    if (!std::isfinite(T))
        throw std::invalid_argument("truncation T must be finite");
    if (T > t_max() && T > kFirstOrdinateFloor) {
        std::ostringstream os;
        os << "truncation T = " << T << " exceeds the largest loaded ordinate " << t_max();
        throw std::invalid_argument(os.str());
    }
    if (!zeros_.empty() && T == t_max())
        return zeros_;
    const auto end = std::lower_bound(zeros_.begin(), zeros_.end(), T,
                                      [](const ZeroDatum& z, double t) { return z.gamma < t; });
    return {zeros_.data(), static_cast<std::size_t>(end - zeros_.begin())};
}

double ZeroSet::truncation_for_count(std::size_t k) const
{
    if (k > zeros_.size())
        throw std::invalid_argument("requested " + std::to_string(k) + " zeros but only "
                                    + std::to_string(zeros_.size()) + " are loaded");
    if (k == zeros_.size())
        return zeros_.empty() ? kFirstOrdinateFloor : t_max();
    if (k == 0)
        return kFirstOrdinateFloor;
    return 0.5 * (zeros_[k - 1].gamma + zeros_[k].gamma);
}

std::span<const ZeroDatum> ZeroSet::first(std::size_t k) const
{
    if (k > zeros_.size())
        throw std::invalid_argument("requested " + std::to_string(k) + " zeros but only "
                                    + std::to_string(zeros_.size()) + " are loaded");
    return {zeros_.data(), k};
}

ZeroSet enrich(std::span<const Ordinate> ordinates, const EnrichOptions& opts,
               const ZetaEvaluator& evaluator)
{
    const ZetaEvaluator eval = evaluator ? evaluator : ZetaEvaluator(default_evaluator);
    std::vector<ZeroDatum> out(ordinates.size());
    std::vector<double> residual(ordinates.size(), 0.0);
    parallel_chunks(ordinates.size(), opts.workers, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const auto& o = ordinates[i];
            ZeroDatum& z = out[i];
            z.index = o.index;
            z.gamma = o.gamma;
            if (!(o.gamma > kFirstOrdinateFloor)) {
                residual[i] = std::numeric_limits<double>::infinity();
                continue;
            }
            const ZetaPair at_rho = eval(Complex{0.5, o.gamma});
            z.zprime = at_rho.derivative;
            z.z2rho = eval(Complex{1.0, 2.0 * o.gamma}).value;
            residual[i] = std::abs(at_rho.value);
        }
    });
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& z = out[i];
        if (!(z.gamma > kFirstOrdinateFloor))
            throw ZeroResidualError(describe(z.index, z.gamma) + " lies below the first zero",
                                    z.index, z.gamma);
        if (!(residual[i] < opts.residual_tolerance)) {
            std::ostringstream os;
            os << describe(z.index, z.gamma) << " fails the residual check: |zeta(rho)| = "
               << residual[i] << " >= " << opts.residual_tolerance
               << " (ordinate not a zero, or given with too few digits)";
            throw ZeroResidualError(os.str(), z.index, z.gamma);
        }
        if (!(std::abs(z.zprime) >= opts.min_abs_zprime))
            throw ZeroResidualError(describe(z.index, z.gamma)
                                        + " has |zeta'(rho)| below the simplicity threshold",
                                    z.index, z.gamma);
    }
    return ZeroSet(std::move(out), opts.residual_tolerance);
}

void verify_residuals(const ZeroSet& set, unsigned workers, const ZetaEvaluator& evaluator)
{
    const ZetaEvaluator eval = evaluator ? evaluator : ZetaEvaluator(default_evaluator);
    const auto zeros = set.zeros();
    std::vector<double> residual(zeros.size(), 0.0);
    parallel_chunks(zeros.size(), workers, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
            residual[i] = std::abs(eval(zeros[i].rho()).value);
    });
    for (std::size_t i = 0; i < zeros.size(); ++i) {
        if (!(residual[i] < set.tolerance())) {
            std::ostringstream os;
            os << describe(zeros[i].index, zeros[i].gamma)
               << " fails the residual check: |zeta(rho)| = " << residual[i];
            throw ZeroResidualError(os.str(), zeros[i].index, zeros[i].gamma);
        }
        if (!(std::abs(zeros[i].zprime) >= 1e-8))
            throw ZeroResidualError(describe(zeros[i].index, zeros[i].gamma)
                                        + " has |zeta'(rho)| below the simplicity threshold",
                                    zeros[i].index, zeros[i].gamma);
    }
}

void save_cache(const ZeroSet& set, const std::filesystem::path& path)
{
    std::vector<unsigned char> buf;
    buf.reserve(kHeaderBytes + kRecordBytes * set.size() + 4);
    buf.insert(buf.end(), kCacheMagic.begin(), kCacheMagic.end());
    put<std::uint32_t>(buf, kCacheVersion);
    put<std::uint32_t>(buf, 0);
    put<std::uint64_t>(buf, set.size());
    put<double>(buf, set.tolerance());
    for (const auto& z : set.zeros()) {
        put<std::uint64_t>(buf, z.index);
        put<double>(buf, z.gamma);
        put<double>(buf, z.zprime.real());
        put<double>(buf, z.zprime.imag());
        put<double>(buf, z.z2rho.real());
        put<double>(buf, z.z2rho.imag());
    }
    put<std::uint32_t>(buf, checksum(buf.data(), buf.size()));
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ZeroFormatError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out)
        throw ZeroFormatError("write failed for " + path.string());
}

bool is_cache_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    return in.gcount() == 8 && magic == kCacheMagic;
}

ZeroSet load_cache(const std::filesystem::path& path, bool verify, unsigned workers)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ZeroFormatError("cannot open zero cache " + path.string());
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    const std::string name = path.string();
    if (buf.size() < 8 || std::memcmp(buf.data(), kCacheMagic.data(), 8) != 0)
        throw ZeroFormatError(name + ": not a zero cache (bad magic)");
    if (buf.size() < kHeaderBytes + 4)
        throw ZeroFormatError(name + ": checksum error (file truncated)");
    const auto stored = get<std::uint32_t>(buf.data() + buf.size() - 4);
    const std::uint64_t count = get<std::uint64_t>(buf.data() + 16);
    const bool size_ok = count <= (buf.size() - kHeaderBytes - 4) / kRecordBytes
                         && buf.size() == kHeaderBytes + kRecordBytes * count + 4;
    if (!size_ok || checksum(buf.data(), buf.size() - 4) != stored)
        throw ZeroFormatError(name + ": checksum error (file truncated or corrupted)");
    const auto version = get<std::uint32_t>(buf.data() + 8);
    if (version != kCacheVersion)
        throw ZeroFormatError(name + ": unsupported cache version " + std::to_string(version));
    const double tolerance = get<double>(buf.data() + 24);
    std::vector<ZeroDatum> zeros(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const unsigned char* r = buf.data() + kHeaderBytes + kRecordBytes * i;
        zeros[i].index = get<std::uint64_t>(r);
        zeros[i].gamma = get<double>(r + 8);
        zeros[i].zprime = {get<double>(r + 16), get<double>(r + 24)};
        zeros[i].z2rho = {get<double>(r + 32), get<double>(r + 40)};
    }
    ZeroSet set(std::move(zeros), tolerance);
    if (verify)
        verify_residuals(set, workers);
    return set;
}

ZeroSet load_zero_set(const std::filesystem::path& path, const EnrichOptions& opts)
{
    if (is_cache_file(path))
        return load_cache(path, true, opts.workers);
    const auto ordinates = load_ordinates(path);
    return enrich(ordinates, opts);
}

void write_zero_csv(const ZeroSet& set, std::ostream& out)
{
    const auto old = out.precision(17);
    out << "index,gamma,zprime_re,zprime_im,z2_re,z2_im\n";
    for (const auto& z : set.zeros())
        out << z.index << ',' << z.gamma << ',' << z.zprime.real() << ',' << z.zprime.imag() << ','
            << z.z2rho.real() << ',' << z.z2rho.imag() << '\n';
    out.precision(old);
}

SzDiagnostic sz_diagnostic(const ZeroSet& set, double T)
{
    const auto zeros = set.window(T);
    SzDiagnostic out;
    CompensatedSum<double> inv;
    CompensatedSum<double> ratio;
    for (const auto& z : zeros) {
        const double zp = std::abs(z.zprime);
        inv.add(1.0 / zp);
        ratio.add(std::abs(z.z2rho) / (std::abs(z.rho()) * zp));
    }
    out.sum_inv_zp = inv.value();
    out.sum_z2_over_rho_zp = ratio.value();
    out.zeros_used = zeros.size();
    if (T > 1.0)
        out.normalized = out.sum_inv_zp / (T * std::sqrt(std::log(T)));
    return out;
}

double zero_count_estimate(double T)
{
    if (T <= 2.0 * kPi)
        return 0.0;
    return T / (2.0 * kPi) * std::log(T / (2.0 * kPi * std::exp(1.0)));
}

} // namespace liouconv
