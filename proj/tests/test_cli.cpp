#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "isingspec/cli.hpp"
#include "isingspec/config.hpp"
#include "isingspec/common.hpp"

using namespace isingspec;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  return {code, o.str(), e.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("isingspec_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// rows of a csv file, comments and header skipped
std::vector<std::vector<double>> csv_rows(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::vector<double>> rows;
  bool header = true;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<double> r;
    std::istringstream cells(line);
    for (std::string c; std::getline(cells, c, ',');) r.push_back(std::strtod(c.c_str(), nullptr));
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST_CASE("empty config has no command") {
  const auto v = validate_config("# nothing here\n");
  CHECK(!v.config);
  REQUIRE(v.errors.size() == 1);
  CHECK(v.errors[0] == "no command");
}

TEST_CASE("every config error is reported with its line") {
  const auto v = validate_config("command = simulate\nn = 4\nbogus = 1\nn = 8\nh = -1\n");
  CHECK(!v.config);
  REQUIRE(v.errors.size() == 4);
  CHECK(v.errors[0] == "line 2: n: must be >= 8");
  CHECK(v.errors[1] == "line 3: unknown key 'bogus' for command simulate");
  CHECK(v.errors[2] == "line 4: duplicate key 'n' (first at line 2)");
  CHECK(v.errors[3] == "line 5: h: must be >= 0");
  const auto m = validate_config("command = simulate\n");
  CHECK(m.errors.size() == 2);
  CHECK(m.errors[0] == "missing required key 'n' for command simulate");
}

TEST_CASE("non-integrable piece is rejected") {
  const auto v = validate_config("command = spectral\nkind = rho\npiece = 1 inf 1 -0.5\n");
  CHECK(!v.config);
  REQUIRE(v.errors.size() == 1);
  CHECK(v.errors[0].rfind("line 3:", 0) == 0);
  CHECK(v.errors[0].find("p < -1") != std::string::npos);
  CHECK(validate_config("command = spectral\nkind = rho\npiece = 1 inf 1 -1.5\n").config);
}

TEST_CASE("normalization is canonical and idempotent") {
  const std::string text = "# test\ncommand = simulate\nh = 0.10\nn=64\n  dynamics = metropolis # local\nseed = 7\n";
  const std::string expected =
      "command = simulate\nn = 64\nh = 0.1\nbeta_J = 0.44068679350977147\nchains = 1\nsamples = 1000\n"
      "thin = 1\ntherm = 200\ndynamics = metropolis\nmax_dist = 16\nsnapshots = 0\nseed = 7\n"
      "threads = auto\nout = out/simulate\n";
  CHECK(normalize_config(text) == expected);
  CHECK(normalize_config(expected) == expected);
  CHECK(serialize_config(*validate_config(text).config) == expected);
  CHECK_THROWS_AS(normalize_config("command = simulate\n"), PreconditionError);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run({}).code == cli::usage);
  CHECK(run({"frobnicate"}).code == cli::usage);
  const auto r = run({"simulate", "--h", "0.1"});
  CHECK(r.code == cli::usage);
  CHECK(r.err.find("missing required key 'n'") != std::string::npos);
  CHECK(run({"--help"}).code == cli::ok);
}

TEST_CASE("spectral command evaluates K") {
  const auto dir = scratch("spectral");
  const auto r = run({"spectral", "--atom", "1 1", "--K-grid", "0:0.5:2", "--out", (dir / "s").string()});
  REQUIRE(r.code == cli::ok);
  const auto rows = csv_rows(dir / "s" / "K.csv");
  REQUIRE(rows.size() == 5);
  CHECK(rows[0][1] == doctest::Approx(M_PI).epsilon(1e-12));
  // K(s) = pi e^{-s} for a unit atom at m = 1
  CHECK(rows[4][1] == doctest::Approx(M_PI * std::exp(-2.0)).epsilon(1e-10));
  const auto text = slurp(dir / "s" / "K.csv");
  CHECK(text.rfind("# manifest: ", 0) == 0);
  CHECK(slurp(dir / "s" / "manifest.txt").find("atom = 1 1") != std::string::npos);
}

TEST_CASE("asymptotics approach sqrt(pi/2)") {
  const auto dir = scratch("asym");
  const auto r = run({"asymptotics", "--atom", "1 1", "--t", "200", "--out", (dir / "a").string()});
  REQUIRE(r.code == cli::ok);
  const auto rows = csv_rows(dir / "a" / "asymptotics.csv");
  REQUIRE(rows.size() == 1);
  CHECK(std::abs(rows[0][1] / std::sqrt(M_PI / 2) - 1.0) < 0.01);
}

TEST_CASE("domain errors exit 4, I/O errors exit 5") {
  const auto dir = scratch("errors");
  CHECK(run({"fit", "--in", (dir / "missing.csv").string(), "--window", "0:1"}).code == cli::io);
  {
    std::ofstream f(dir / "k.csv");
    f << "s,K\n0,1\n0.1,0.9\n";
  }
  CHECK(run({"fit", "--in", (dir / "k.csv").string(), "--window", "0:1", "--out", (dir / "f.json").string()}).code ==
        cli::domain);
  CHECK(run({"estimate", "--run", (dir / "nowhere").string()}).code == cli::io);
}

TEST_CASE("config file with flag override") {
  const auto dir = scratch("override");
  {
    std::ofstream f(dir / "c.txt");
    f << "command = spectral\natom = 1 1\nK_grid = 0:1:1\nout = " << (dir / "x").string() << "\n";
  }
  const auto r = run({"spectral", "--config", (dir / "c.txt").string(), "--K-grid", "0:1:3"});
  REQUIRE(r.code == cli::ok);
  CHECK(csv_rows(dir / "x" / "K.csv").size() == 4);
  CHECK(run({"fit", "--config", (dir / "c.txt").string()}).code == cli::usage);
}

TEST_CASE("fit writes terms, errors and gap check") {
  const auto dir = scratch("fit");
  {
    std::ofstream f(dir / "k.csv");
    f.precision(17);
    f << "# two exponentials\nt,K\n";
    for (int k = 0; k <= 200; ++k) {
      const double t = 0.05 * k;
      f << t << "," << std::exp(-t) + 0.3 * std::exp(-1.618 * t) << "\n";
    }
  }
  const auto r = run({"fit", "--in", (dir / "k.csv").string(), "--terms", "2", "--window", "0:10", "--out",
                      (dir / "fit.json").string()});
  REQUIRE(r.code == cli::ok);
  const auto j = nlohmann::json::parse(slurp(dir / "fit.json"));
  REQUIRE(j["terms"].size() == 2);
  CHECK(j["terms"][0]["mass"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(j["terms"][1]["mass"].get<double>() == doctest::Approx(1.618).epsilon(1e-6));
  CHECK(j["gap_check"]["ok"].get<bool>());
  CHECK(j["covariance"].size() == 4);
}

TEST_CASE("pipeline output is reproducible across thread counts") {
  const auto dir = scratch("pipeline");
  const std::vector<std::string> base = {"pipeline", "--n", "32", "--h", "0.3", "--samples", "200", "--snapshots",
                                         "50", "--s-max", "8", "--eps", "2", "--clt-L", "2", "--seed", "11"};
  auto a = base, b = base;
  a.insert(a.end(), {"--threads", "1", "--out", (dir / "a").string()});
  b.insert(b.end(), {"--threads", "4", "--out", (dir / "b").string()});
  const auto ra = run(a), rb = run(b);
  REQUIRE((ra.code == cli::ok || ra.code == cli::flagged));
  CHECK(ra.code == rb.code);
  for (const char* f : {"simulate/chain_0.csv", "simulate/two_point.csv", "simulate/summary.csv", "estimate/H.csv",
                        "estimate/K.csv", "estimate/clt.csv", "fit.json"}) {
    CAPTURE(f);
    const auto ta = slurp(dir / "a" / f);
    CHECK(!ta.empty());
    CHECK(ta == slurp(dir / "b" / f));
  }
}

TEST_CASE("output root applies to relative paths") {
  const auto dir = scratch("root");
  ::setenv("ISINGSPEC_OUT_ROOT", dir.string().c_str(), 1);
  const auto r = run({"spectral", "--atom", "2 1", "--K-grid", "0:1:1", "--out", "rel"});
  ::unsetenv("ISINGSPEC_OUT_ROOT");
  CHECK(r.code == cli::ok);
  CHECK(fs::exists(dir / "rel" / "K.csv"));
}
