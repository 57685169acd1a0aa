#pragma once

// Command-line front end: sieve, convolve, zeros-enrich, verify <target>, bench.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace liouconv::cli {

enum ExitCode : int { kOk = 0, kInvariantFailure = 1, kUsageError = 2 };

/// Sample grid: "log:COUNT:LO:HI", "lin:COUNT:LO:HI" or "list:V1,V2,...".
/// A bare number is a one-point list.
std::vector<double> parse_samples(const std::string& spec);

/// Column-oriented report with a trailing summary block.
struct Report {
    using Cell = std::variant<double, std::int64_t, std::string>;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::vector<std::pair<std::string, Cell>> summary;
};

/// CSV: header, rows, then one "# key,value" line per summary entry.
void write_csv(const Report& report, std::ostream& out);
/// JSON: {"columns": [...], "rows": [{...}], "summary": {...}}.
void write_json(const Report& report, std::ostream& out);

/// Runs one command. `args` excludes the program name. Normal output goes
/// to `out`, diagnostics to `err`. Returns an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_main(int argc, char** argv);

} // namespace liouconv::cli
