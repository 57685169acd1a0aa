#pragma once

// Tables of the Liouville function lambda(n) or the Moebius function mu(n)
// for 1 <= n <= N, together with their running sums L(x) / M(x).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace liouconv {

enum class Kind { liouville, moebius };

std::string_view kind_name(Kind kind);
Kind parse_kind(std::string_view text);

class SizingError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SieveOptions {
    /// Upper bound on table memory (values + prefix), in bytes.
    std::uint64_t memory_limit = std::uint64_t{3} << 30;
    /// Limits above this use the segmented construction.
    std::uint64_t segmented_above = 10'000'000;
    /// 0 = pick automatically from the limit; otherwise force the method.
    enum class Method { automatic, linear, segmented } method = Method::automatic;
    std::uint64_t segment_size = std::uint64_t{1} << 18;
    unsigned workers = 1;
};

/// Immutable table of lambda or mu; safe to share between threads.
class SieveTable {
public:
    SieveTable(Kind kind, std::vector<std::int8_t> values);

    Kind kind() const { return kind_; }
    std::uint64_t limit() const { return limit_; }

    /// values()[n] for 1 <= n <= limit; values()[0] is 0.
    std::span<const std::int8_t> values() const { return values_; }
    std::span<const std::int64_t> prefix() const { return prefix_; }

    int value(std::uint64_t n) const;

    /// Sum of values[n] for n <= floor(x); 0 for 0 <= x < 1.
    std::int64_t summatory(double x) const;

    /// Same as summatory() for integral arguments; k in [0, limit].
    std::int64_t summatory_at(std::uint64_t k) const { return prefix_[k]; }

    static std::uint64_t bytes_required(std::uint64_t limit);

private:
    Kind kind_;
    std::uint64_t limit_;
    std::vector<std::int8_t> values_;
    std::vector<std::int64_t> prefix_;
};

SieveTable build_sieve(Kind kind, std::uint64_t limit, const SieveOptions& opts = {});

/// Flat file: 16-byte header (9-byte magic, version byte, 2 reserved bytes,
/// little-endian uint32 N) followed by N signed bytes.
void save_table(const SieveTable& table, const std::filesystem::path& path);
SieveTable load_table(const std::filesystem::path& path);

} // namespace liouconv
