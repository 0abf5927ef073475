#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include <unistd.h>

#include "cli.hpp"
#include "fconv/error.hpp"
#include "fconv/io.hpp"

using namespace fconv;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("fconv_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<double>> parse_csv(const std::string& text, std::string* header = nullptr) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (header) *header = line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("measure json round trip") {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0), w(0.05, 1.0);
  TempDir dir;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(7), ws(7);
    double s = 0.0;
    for (int i = 0; i < 7; ++i) {
      a[i] = u(gen);
      ws[i] = w(gen);
      s += ws[i];
    }
    for (double& x : ws) x /= s;
    const SpectralMeasure mu(a, ws);
    write_measure(dir / "m.json", mu);
    const SpectralMeasure back = read_measure(dir / "m.json");
    REQUIRE(back.size() == mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
      CHECK(std::abs(back.atoms()[i] - mu.atoms()[i]) <= 1e-15);
      CHECK(std::abs(back.weights()[i] - mu.weights()[i]) <= 1e-15);
    }
  }
}

TEST_CASE("measure json formats") {
  const auto mu = measure_from_json(nlohmann::json::parse(R"({"eigenvalues":[1,0,1,0]})"));
  CHECK(mu == SpectralMeasure({0.0, 1.0}, {0.5, 0.5}));
  CHECK_THROWS_AS(measure_from_json(nlohmann::json::parse(R"({"atoms":[1]})")), ValidationError);
  CHECK_THROWS_AS(measure_from_json(nlohmann::json::parse(R"({"atoms":[1,2],"weights":[1]})")), ValidationError);
  CHECK_THROWS_AS(measure_from_json(nlohmann::json::parse(R"([1,2])")), ValidationError);
  CHECK_THROWS_AS(read_measure("/nonexistent/m.json"), ValidationError);
}

TEST_CASE("csv formats") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(spectrum_csv({-1.0, 2.5}) == "index,eigenvalue\n0,-1\n1,2.5\n");
  DensityCurve d;
  d.E_grid = {0.0, 1.0};
  d.rho = {0.25, 0.5};
  CHECK(density_csv(d) == "E,rho\n0,0.25\n1,0.5\n");
  CdfCurve c;
  c.E_grid = {0.0};
  c.F = {1.0};
  CHECK(cdf_csv(c) == "E,F\n0,1\n");
}

TEST_CASE("atomic writes leave no temporary files") {
  TempDir dir;
  write_file_atomic(dir / "x.txt", "hello\n");
  write_file_atomic(dir / "x.txt", "again\n");
  CHECK(read_file(dir / "x.txt") == "again\n");
  int entries = 0;
  for (const auto& e : fs::directory_iterator(dir.path)) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);
}

TEST_CASE("cli convolve on Dirac inputs gives a step") {
  TempDir dir;
  write_measure(dir / "a.json", SpectralMeasure::dirac(0.5));
  write_measure(dir / "b.json", SpectralMeasure::dirac(1.25));
  const auto r = run({"convolve", "--mu-a", dir / "a.json", "--mu-b", dir / "b.json", "--out", dir.path.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("A1-violated") != std::string::npos);
  const auto summary = nlohmann::json::parse(read_file(dir / "convolve.json"));
  CHECK(summary["a1_violated"] == true);
  std::string header;
  const auto rows = parse_csv(read_file(dir / "cdf.csv"), &header);
  CHECK(header == "E,F");
  for (const auto& row : rows) {
    if (row[0] < 1.75 - 1e-9) REQUIRE(row[1] <= 1e-12);
    if (row[0] >= 1.75) REQUIRE(row[1] == doctest::Approx(1.0));
  }
}

TEST_CASE("cli convolve on Bernoulli inputs gives arcsine curves") {
  TempDir dir;
  write_measure(dir / "b.json", SpectralMeasure({-1.0, 1.0}, {0.5, 0.5}));
  const auto r = run({"convolve", "--mu-a", dir / "b.json", "--mu-b", dir / "b.json", "--out", dir.path.string(),
                      "--grid", "1201"});
  REQUIRE(r.code == 0);
  std::string header;
  const auto rho = parse_csv(read_file(dir / "density.csv"), &header);
  CHECK(header == "E,rho");
  CHECK(rho.size() == 1201);
  for (const auto& row : rho)
    if (std::abs(row[0]) <= 1.5) REQUIRE(std::abs(row[1] - 1.0 / (M_PI * std::sqrt(4.0 - row[0] * row[0]))) < 5e-3);
  const auto F = parse_csv(read_file(dir / "cdf.csv"));
  for (const auto& row : F)
    if (std::abs(row[0]) <= 1.5) REQUIRE(std::abs(row[1] - (0.5 + std::asin(row[0] / 2.0) / M_PI)) < 0.01);
}

TEST_CASE("cli convolve with delta at zero smooths the other measure") {
  TempDir dir;
  const SpectralMeasure mu({-1.0, 0.0, 1.5}, {0.2, 0.3, 0.5});
  write_measure(dir / "d.json", SpectralMeasure::dirac(0.0));
  write_measure(dir / "m.json", mu);
  const double eta = 0.05;
  const auto r = run({"convolve", "--mu-a", dir / "d.json", "--mu-b", dir / "m.json", "--eta", "0.05", "--out",
                      dir.path.string()});
  REQUIRE(r.code == 0);
  for (const auto& row : parse_csv(read_file(dir / "density.csv"))) {
    double kernel = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
      const double x = row[0] - mu.atoms()[k];
      kernel += mu.weights()[k] * eta / (M_PI * (x * x + eta * eta));
    }
    REQUIRE(std::abs(row[1] - kernel) < 1e-9);
  }
}

TEST_CASE("cli sample") {
  TempDir dir;
  write_measure(dir / "a.json", SpectralMeasure({-1.0, 0.0, 2.0}, {0.25, 0.25, 0.5}));
  write_measure(dir / "z.json", SpectralMeasure::dirac(0.0));
  const std::string before = read_file(dir / "a.json");

  const auto r1 = run({"sample", "--mu-a", dir / "a.json", "--N", "8", "--replicates", "2", "--out", dir.path.string()});
  REQUIRE(r1.code == 0);
  const std::string first = read_file(dir / "spectrum_N8_r1.csv");
  const auto r2 = run({"sample", "--mu-a", dir / "a.json", "--N", "8", "--replicates", "2", "--out", dir.path.string()});
  REQUIRE(r2.code == 0);
  CHECK(read_file(dir / "spectrum_N8_r1.csv") == first);
  CHECK(read_file(dir / "spectrum_N8_r0.csv") != first);

  const auto r3 = run({"sample", "--mu-a", dir / "a.json", "--mu-b", dir / "z.json", "--N", "8", "--out", dir.path.string()});
  REQUIRE(r3.code == 0);
  CHECK(read_file(dir / "spectrum_N8_r0.csv") == "index,eigenvalue\n0,-1\n1,-1\n2,0\n3,0\n4,2\n5,2\n6,2\n7,2\n");

  const auto bad = run({"sample", "--mu-a", dir / "a.json", "--N", "6", "--out", dir.path.string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("N incompatible with weights") != std::string::npos);
  CHECK(bad.err.find("0.25") != std::string::npos);

  CHECK(read_file(dir / "a.json") == before);
}

TEST_CASE("cli experiment") {
  TempDir dir;
  const auto r = run({"experiment", "variance", "--N", "50,100", "--replicates", "30", "--out", dir.path.string()});
  CHECK((r.code == 0 || r.code == 3));
  const std::string report = read_file(dir / "variance_report.json");
  const auto j = nlohmann::json::parse(report);
  CHECK(j["slopes"].contains("var_m"));
  CHECK(j["slopes"]["var_m"].contains("stderr"));
  const std::string raw = read_file(dir / "variance_raw.csv");

  const auto again = run({"experiment", "variance", "--N", "50,100", "--replicates", "30", "--out", dir.path.string()});
  CHECK(again.code == r.code);
  CHECK(read_file(dir / "variance_report.json") == report);
  CHECK(read_file(dir / "variance_raw.csv") == raw);
}

TEST_CASE("cli exit codes") {
  TempDir dir;
  CHECK(run({"experiment", "variance", "--N", "", "--out", dir.path.string()}).code == 2);
  CHECK(run({"experiment", "variance", "--N", "10,x", "--out", dir.path.string()}).code == 2);
  CHECK(run({"experiment", "no-such-experiment", "--out", dir.path.string()}).code == 2);
  CHECK(run({"convolve", "--mu-a", "/nonexistent.json", "--mu-b", "/nonexistent.json"}).code == 2);
  CHECK(run({"sample", "--ensemble", "gaussian"}).code == 2);
  CHECK(run({"sample", "--replicates", "0"}).code == 2);
  CHECK(run({"convolve", "--mu-a", "a", "--mu-b", "b", "--eta", "-1"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"--help"}).code == 0);

  // A failing pre-registered threshold maps to 3.
  write_file_atomic(dir / "strict.json", R"({"variance_slope_lo": -1.0, "variance_slope_hi": -0.5})");
  CHECK(run({"experiment", "variance", "--N", "20,40", "--replicates", "30", "--thresholds", dir / "strict.json",
             "--out", dir.path.string()})
            .code == 3);
}
