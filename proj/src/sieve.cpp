#include "liouconv/sieve.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "liouconv/numeric.hpp"

namespace liouconv {

static_assert(std::endian::native == std::endian::little,
              "table files are written in native little-endian order");

std::string_view kind_name(Kind kind)
{
    return kind == Kind::liouville ? "liouville" : "moebius";
}

Kind parse_kind(std::string_view text)
{
    if (text == "liouville" || text == "lambda" || text == "L")
        return Kind::liouville;
    if (text == "moebius" || text == "mobius" || text == "mu" || text == "M")
        return Kind::moebius;
    throw std::invalid_argument("unknown kind '" + std::string(text)
                                + "' (expected liouville or moebius)");
}

namespace {

std::vector<std::uint32_t> primes_up_to(std::uint64_t limit)
{
    std::vector<std::uint32_t> primes;
    std::vector<bool> composite(limit + 1, false);
    for (std::uint64_t i = 2; i <= limit; ++i) {
        if (!composite[i])
            primes.push_back(static_cast<std::uint32_t>(i));
        for (std::uint32_t p : primes) {
            if (i * p > limit)
                break;
            composite[i * p] = true;
            if (i % p == 0)
                break;
        }
    }
    return primes;
}

// Euler sieve: every composite i*p is visited once, with p its smallest prime.
std::vector<std::int8_t> linear_sieve(Kind kind, std::uint64_t limit)
{
    std::vector<std::int8_t> v(limit + 1, 0);
    std::vector<bool> composite(limit + 1, false);
    std::vector<std::uint32_t> primes;
    v[1] = 1;
    for (std::uint64_t i = 2; i <= limit; ++i) {
        if (!composite[i]) {
            primes.push_back(static_cast<std::uint32_t>(i));
            v[i] = -1;
        }
        for (std::uint32_t p : primes) {
            const std::uint64_t ip = i * p;
            if (ip > limit)
                break;
            composite[ip] = true;
            if (i % p == 0) {
                v[ip] = kind == Kind::liouville ? static_cast<std::int8_t>(-v[i]) : 0;
                break;
            }
            v[ip] = static_cast<std::int8_t>(-v[i]);
        }
    }
    return v;
}

void sieve_segment(Kind kind, std::uint64_t lo, std::uint64_t hi,
                   std::span<const std::uint32_t> primes, std::span<std::int8_t> out)
{
    const std::uint64_t len = hi - lo;
    std::vector<std::uint64_t> smooth(len, 1);
    std::vector<std::int8_t> sign(len, 1);
    for (std::uint32_t p32 : primes) {
        const std::uint64_t p = p32;
        if (p * p >= hi)
            break;
        if (kind == Kind::moebius) {
            for (std::uint64_t m = (lo + p - 1) / p * p; m < hi; m += p) {
                sign[m - lo] = static_cast<std::int8_t>(-sign[m - lo]);
                smooth[m - lo] *= p;
            }
            const std::uint64_t sq = p * p;
            for (std::uint64_t m = (lo + sq - 1) / sq * sq; m < hi; m += sq)
                sign[m - lo] = 0;
        } else {
            for (std::uint64_t q = p; q < hi; q *= p) {
                for (std::uint64_t m = (lo + q - 1) / q * q; m < hi; m += q) {
                    sign[m - lo] = static_cast<std::int8_t>(-sign[m - lo]);
                    smooth[m - lo] *= p;
                }
                if (q > hi / p)
                    break;
            }
        }
    }
    for (std::uint64_t i = 0; i < len; ++i) {
        const std::uint64_t n = lo + i;
        std::int8_t s = sign[i];
        // n / smooth[i] is 1 or a single prime above sqrt(n).
        if (s != 0 && smooth[i] != n)
            s = static_cast<std::int8_t>(-s);
        out[i] = s;
    }
}

std::vector<std::int8_t> segmented_sieve(Kind kind, std::uint64_t limit,
                                         const SieveOptions& opts)
{
    std::vector<std::int8_t> v(limit + 1, 0);
    v[1] = 1;
    if (limit < 2)
        return v;
    const auto root = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(limit))) + 2;
    const auto primes = primes_up_to(root);
    const std::uint64_t seg = std::max<std::uint64_t>(opts.segment_size, 1024);
    const std::uint64_t first = 2;
    const std::uint64_t segments = (limit + 1 - first + seg - 1) / seg;
    parallel_chunks(segments, opts.workers, [&](std::size_t s0, std::size_t s1) {
        for (std::size_t s = s0; s < s1; ++s) {
            const std::uint64_t lo = first + s * seg;
            const std::uint64_t hi = std::min(limit + 1, lo + seg);
            sieve_segment(kind, lo, hi, primes, std::span(v).subspan(lo, hi - lo));
        }
    });
    return v;
}

constexpr std::array<char, 9> kLambdaMagic = {'L', 'A', 'M', 'B', 'D', 'A', 'T', 'B', 'L'};
constexpr std::array<char, 9> kMoebiusMagic = {'M', 'O', 'E', 'B', 'S', 'T', 'B', 'L', '\0'};
constexpr std::uint8_t kTableVersion = 1;

} // namespace

SieveTable::SieveTable(Kind kind, std::vector<std::int8_t> values)
    : kind_(kind), limit_(values.empty() ? 0 : values.size() - 1), values_(std::move(values))
{
    if (limit_ == 0)
        throw SizingError("sieve table needs N >= 1");
    values_[0] = 0;
    prefix_.assign(limit_ + 1, 0);
    std::int64_t run = 0;
    for (std::uint64_t n = 1; n <= limit_; ++n) {
        run += values_[n];
        prefix_[n] = run;
    }
}

int SieveTable::value(std::uint64_t n) const
{
    if (n == 0 || n > limit_)
        throw std::out_of_range("sieve index " + std::to_string(n) + " outside [1, "
                                + std::to_string(limit_) + "]");
    return values_[n];
}

std::int64_t SieveTable::summatory(double x) const
{
    if (!std::isfinite(x) || x < 0.0)
        throw std::invalid_argument("summatory: x must be a finite nonnegative real");
    if (x > static_cast<double>(limit_))
        throw SizingError("summatory: x = " + std::to_string(x) + " exceeds table limit "
                          + std::to_string(limit_));
    return prefix_[static_cast<std::uint64_t>(std::floor(x))];
}

std::uint64_t SieveTable::bytes_required(std::uint64_t limit)
{
    return (limit + 1) * (sizeof(std::int8_t) + sizeof(std::int64_t));
}

SieveTable build_sieve(Kind kind, std::uint64_t limit, const SieveOptions& opts)
{
    if (limit == 0)
        throw SizingError("build_sieve: N must be at least 1");
    if (limit > 0xFFFFFFFFull)
        throw SizingError("build_sieve: N above 2^32 - 1 is not supported");
    const std::uint64_t need = SieveTable::bytes_required(limit);
    if (need > opts.memory_limit)
        throw SizingError("build_sieve: N = " + std::to_string(limit) + " needs "
                          + std::to_string(need >> 20) + " MiB, above the configured limit of "
                          + std::to_string(opts.memory_limit >> 20) + " MiB");
    bool segmented = limit > opts.segmented_above;
    if (opts.method == SieveOptions::Method::linear)
        segmented = false;
    else if (opts.method == SieveOptions::Method::segmented)
        segmented = true;
    auto values = segmented ? segmented_sieve(kind, limit, opts) : linear_sieve(kind, limit);
    return SieveTable(kind, std::move(values));
}

void save_table(const SieveTable& table, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw FormatError("cannot open " + path.string() + " for writing");
    std::array<char, 16> header{};
    const auto& magic = table.kind() == Kind::liouville ? kLambdaMagic : kMoebiusMagic;
    std::memcpy(header.data(), magic.data(), magic.size());
    header[9] = static_cast<char>(kTableVersion);
    const auto n = static_cast<std::uint32_t>(table.limit());
    std::memcpy(header.data() + 12, &n, sizeof n);
    out.write(header.data(), header.size());
    const auto vals = table.values().subspan(1);
    out.write(reinterpret_cast<const char*>(vals.data()), static_cast<std::streamsize>(vals.size()));
    if (!out)
        throw FormatError("write failed for " + path.string());
}

SieveTable load_table(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path.string());
    std::array<char, 16> header{};
    in.read(header.data(), header.size());
    if (in.gcount() != 16)
        throw FormatError(path.string() + ": short header");
    Kind kind;
    if (std::memcmp(header.data(), kLambdaMagic.data(), 9) == 0)
        kind = Kind::liouville;
    else if (std::memcmp(header.data(), kMoebiusMagic.data(), 9) == 0)
        kind = Kind::moebius;
    else
        throw FormatError(path.string() + ": bad magic");
    if (static_cast<std::uint8_t>(header[9]) != kTableVersion)
        throw FormatError(path.string() + ": unsupported table version "
                          + std::to_string(static_cast<std::uint8_t>(header[9])));
    std::uint32_t n = 0;
    std::memcpy(&n, header.data() + 12, sizeof n);
    if (n == 0)
        throw FormatError(path.string() + ": empty table");
    std::vector<std::int8_t> values(static_cast<std::size_t>(n) + 1, 0);
    in.read(reinterpret_cast<char*>(values.data() + 1), n);
    if (static_cast<std::uint32_t>(in.gcount()) != n)
        throw FormatError(path.string() + ": truncated payload");
    if (in.peek() != std::char_traits<char>::eof())
        throw FormatError(path.string() + ": trailing bytes after payload");
    for (std::uint32_t i = 1; i <= n; ++i)
        if (values[i] < -1 || values[i] > 1)
            throw FormatError(path.string() + ": value out of range at n = " + std::to_string(i));
    return SieveTable(kind, std::move(values));
}

} // namespace liouconv
