#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "liouconv/cli.hpp"
#include "liouconv/sieve.hpp"
#include "liouconv/zeros.hpp"

using namespace liouconv;
namespace fs = std::filesystem;

namespace {

const char* const kFirstTen =
    "14.134725141734693790\n21.022039638771554993\n25.010857580145688763\n"
    "30.424876125859513210\n32.935061587739189691\n37.586178158825671257\n"
    "40.918719012147495187\n43.327073280914999519\n48.005150881167159727\n"
    "49.773832477672302181\n";

struct Scratch {
    fs::path dir;
    Scratch()
    {
        dir = fs::temp_directory_path() / "liouconv_cli_test";
        fs::remove_all(dir);
        fs::create_directories(dir);
        std::ofstream(dir / "zeros.txt") << kFirstTen;
    }
    ~Scratch() { fs::remove_all(dir); }
    std::string path(const char* name) const { return (dir / name).string(); }
};

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args)
{
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        out.push_back(line);
    return out;
}

} // namespace

TEST_CASE("sample grids")
{
    const auto g = cli::parse_samples("log:3:1:100");
    REQUIRE(g.size() == 3);
    CHECK(g[0] == doctest::Approx(1.0));
    CHECK(g[1] == doctest::Approx(10.0));
    CHECK(g[2] == doctest::Approx(100.0));
    CHECK(cli::parse_samples("lin:5:1:3")[1] == doctest::Approx(1.5));
    CHECK(cli::parse_samples("list:1e3,1e4").size() == 2);
    CHECK(cli::parse_samples("7.5")[0] == 7.5);
    CHECK_THROWS(cli::parse_samples("log:3:0:100"));
    CHECK_THROWS(cli::parse_samples("cubic:3:1:2"));
    CHECK_THROWS(cli::parse_samples("list:1,x"));
    CHECK_THROWS(cli::parse_samples("lin:2.5:1:2"));
}

TEST_CASE("report writers")
{
    cli::Report r;
    r.columns = {"x", "name", "count"};
    r.rows.push_back({1.5, std::string("a"), std::int64_t{3}});
    r.summary.emplace_back("ok", std::string("yes"));
    std::ostringstream csv;
    cli::write_csv(r, csv);
    CHECK(csv.str() == "x,name,count\n1.5,a,3\n# ok,yes\n");
    std::ostringstream js;
    cli::write_json(r, js);
    const auto j = nlohmann::json::parse(js.str());
    CHECK(j["rows"][0]["x"] == 1.5);
    CHECK(j["rows"][0]["count"] == 3);
    CHECK(j["summary"]["ok"] == "yes");
}

TEST_CASE("usage errors exit with status 2")
{
    Scratch s;
    CHECK(run({"verify", "dirichlet", "--output", s.path("d.csv")}).code == 2);
    CHECK(run({"verify", "nonsense"}).code == 2);
    CHECK(run({}).code == 2);
    CHECK(run({"verify", "L", "--zeros", s.path("missing.txt"), "--output", s.path("m.csv")}).code == 2);
    CHECK(run({"verify", "L", "--zeros", s.path("zeros.txt"), "--count", "11", "--output", s.path("c.csv")}).code
          == 2);
    CHECK(run({"verify", "L", "--zeros", s.path("zeros.txt"), "--T", "80", "--output", s.path("t.csv")}).code == 2);
    CHECK(run({"verify", "L", "--samples", "log:1:2", "--zeros", s.path("zeros.txt"), "--output", s.path("g.csv")})
              .code
          == 2);
    CHECK(run({"bench", "--limit", "300", "--output", s.path("b.csv")}).code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("verify L writes a report and a manifest")
{
    Scratch s;
    const auto out = s.path("l.csv");
    const auto r = run({"verify", "L", "--limit", "1000", "--zeros", s.path("zeros.txt"), "--count", "5,10",
                        "--samples", "log:7:10:1000", "--output", out});
    REQUIRE(r.code == 0);
    const auto rows = lines(slurp(out));
    REQUIRE(rows.size() >= 15);
    CHECK(rows[0] == "x,direct,main,single,double,total,residual,envelope,T,zeros_used,pair_terms");
    CHECK(rows[1].rfind("10,", 0) == 0);
    CHECK(slurp(out).find("# median_strictly_decreasing,") != std::string::npos);

    const auto manifest = nlohmann::json::parse(slurp(out + ".manifest.json"));
    CHECK(manifest["config"]["limit"] == 1000);
    CHECK(manifest["config"]["target"] == "L");
    CHECK(manifest["exit_status"] == 0);
    CHECK(manifest["inputs"].size() == 1);
    CHECK(manifest["inputs"][0]["crc32"].get<std::string>().size() == 8);
    CHECK(manifest["versions"].contains("fftw"));
}

TEST_CASE("config file with flag precedence")
{
    Scratch s;
    {
        std::ofstream cfg(s.path("run.cfg"));
        cfg << "# comment\nlimit=50\nzeros=" << s.path("zeros.txt") << "\nsamples=list:20,30\nformat=json\n";
    }
    const auto out = s.path("cfg.json");
    const auto r = run({"verify", "M", "--config", s.path("run.cfg"), "--limit", "200", "--output", out});
    REQUIRE(r.code == 0);
    const auto manifest = nlohmann::json::parse(slurp(out + ".manifest.json"));
    CHECK(manifest["config"]["limit"] == 200);
    CHECK(manifest["inputs"].size() == 2);
    const auto report = nlohmann::json::parse(slurp(out));
    CHECK(report["rows"].size() == 2);
    CHECK(report["rows"][1]["x"] == 30.0);
}

TEST_CASE("identity target")
{
    Scratch s;
    const auto out = s.path("id.csv");
    const auto r = run({"verify", "identity", "--d", "2", "--trials", "6", "--output", out});
    CHECK(r.code == 0);
    const auto rows = lines(slurp(out));
    CHECK(rows.size() == 1 + 6 + 2);
    CHECK(run({"verify", "identity", "--d", "5", "--output", out}).code == 2);
}

TEST_CASE("explicit targets run")
{
    Scratch s;
    const auto z = s.path("zeros.txt");
    CHECK(run({"verify", "cesaro", "--zeros", z, "--samples", "list:100,1000", "--output", s.path("c.csv")}).code == 0);
    CHECK(run({"verify", "cesaro-mu", "--zeros", z, "--samples", "list:100", "--output", s.path("cm.csv")}).code == 0);
    CHECK(run({"verify", "dfold", "--d", "3", "--zeros", z, "--samples", "list:100", "--output", s.path("df.csv")}).code
          == 0);
    CHECK(run({"verify", "dfold", "--d", "3", "--kind", "moebius", "--zeros", z, "--samples", "list:100", "--output",
               s.path("dm.csv")})
              .code
          == 2);
    CHECK(run({"verify", "dirichlet", "--zeros", z, "--s", "3,1", "--limit", "2000", "--output", s.path("di.csv")}).code
          == 0);
    CHECK(slurp(s.path("di.csv")).find("total_im") != std::string::npos);
    CHECK(run({"verify", "dirichlet", "--zeros", z, "--s", "3,x", "--output", s.path("dx.csv")}).code == 2);
    CHECK(run({"verify", "exponential", "--zeros", z, "--y", "0.5,0.2", "--output", s.path("e.csv")}).code == 0);
    CHECK(run({"verify", "weighted", "--zeros", z, "--samples", "list:100,300", "--a", "0.1", "--b", "1.5", "--output",
               s.path("w.csv")})
              .code
          == 0);
}

TEST_CASE("reports are identical for any worker count")
{
    Scratch s;
    const auto z = s.path("zeros.txt");
    REQUIRE(run({"verify", "cesaro", "--zeros", z, "--samples", "log:5:10:5000", "--workers", "1", "--output",
                 s.path("w1.csv")})
                .code
            == 0);
    REQUIRE(run({"verify", "cesaro", "--zeros", z, "--samples", "log:5:10:5000", "--workers", "4", "--output",
                 s.path("w4.csv")})
                .code
            == 0);
    CHECK(slurp(s.path("w1.csv")) == slurp(s.path("w4.csv")));
}

TEST_CASE("sieve, convolve, zeros-enrich and bench commands")
{
    Scratch s;
    REQUIRE(run({"sieve", "--kind", "moebius", "--limit", "100", "--output", s.path("mu.bin")}).code == 0);
    const auto table = load_table(s.path("mu.bin"));
    CHECK(table.kind() == Kind::moebius);
    CHECK(table.limit() == 100);
    CHECK(fs::exists(s.path("mu.bin") + std::string(".manifest.json")));

    REQUIRE(run({"convolve", "--limit", "5", "--output", s.path("s.csv")}).code == 0);
    const auto series = slurp(s.path("s.csv"));
    CHECK(series.rfind("n,value\n2,1\n3,-2\n4,-1\n5,4\n", 0) == 0);
    CHECK(series.find("# abs_S_equals_n_minus_1_at,2 3 5") != std::string::npos);

    REQUIRE(run({"zeros-enrich", "--zeros", s.path("zeros.txt"), "--output", s.path("z.cache"), "--csv",
                 s.path("z.csv")})
                .code
            == 0);
    CHECK(load_cache(s.path("z.cache")).size() == 10);
    CHECK(lines(slurp(s.path("z.csv"))).size() == 11);

    const auto b = run({"bench", "--limit", "256", "--d", "3", "--trials", "1", "--output", s.path("bench.csv")});
    CHECK(b.code == 0);
    CHECK(slurp(s.path("bench.csv")).find("# outputs_equal,yes") != std::string::npos);
}
