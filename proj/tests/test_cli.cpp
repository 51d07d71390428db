#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include "ocpdl/cli.hpp"
#include "ocpdl/streams.hpp"

using namespace ocpdl;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("ocpdl_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// CSV rows split into fields; the header line is dropped.
std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      continue;
    }
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      fields.push_back(line.substr(pos, comma - pos));
      pos = comma + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

// Everything except the wall-clock column, which legitimately varies.
std::string drop_wall(const std::string& csv) {
  std::string out;
  for (const auto& row : csv_rows(csv)) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i == 3) continue;
      out += row[i];
      out += ',';
    }
    out += '\n';
  }
  return out;
}

int run(std::initializer_list<std::string> args) { return run_cli(std::vector<std::string>(args)); }

}  // namespace

TEST_CASE("config files parse key=value lines with comments and padding") {
  TempDir tmp;
  const auto path = tmp.path / "run.cfg";
  write_file(path, "# comment\n\n  rank = 5 \nmethod=als\nlambda=0.25\nbalanced=true\n");
  const KeyValueConfig cfg = KeyValueConfig::from_file(path);
  CHECK(cfg.get_int("rank", 0) == 5);
  CHECK(cfg.get_string("method") == "als");
  CHECK(cfg.get_double("lambda", 0.0) == 0.25);
  CHECK(cfg.get_bool("balanced", false));
  CHECK(cfg.get_int("T", 77) == 77);  // absent -> fallback
  CHECK_FALSE(cfg.has("T"));

  write_file(tmp.path / "bad.cfg", "rank 5\n");
  CHECK_THROWS_AS(KeyValueConfig::from_file(tmp.path / "bad.cfg"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::from_file(tmp.path / "missing.cfg"), IoError);
}

TEST_CASE("typed getters reject malformed values") {
  KeyValueConfig cfg;
  cfg.set("rank", "3x");
  cfg.set("lambda", "0.5oops");
  cfg.set("balanced", "maybe");
  CHECK_THROWS_AS(cfg.get_int("rank", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_double("lambda", 0.0), ConfigError);
  CHECK_THROWS_AS(cfg.get_bool("balanced", false), ConfigError);
  CHECK_THROWS_AS(cfg.get_string("absent"), ConfigError);
  CHECK_THROWS_AS(cfg.set("", "x"), ConfigError);
}

TEST_CASE("unknown keys are rejected against an allowed list") {
  KeyValueConfig cfg;
  cfg.set("rank", "2");
  cfg.set("rnak", "2");
  CHECK_THROWS_AS(cfg.require_known({"rank", "out"}), ConfigError);
}

TEST_CASE("shape strings parse strictly") {
  CHECK(parse_shape("30,30,500") == Shape{30, 30, 500});
  CHECK(parse_shape("8, 9 ,10") == Shape{8, 9, 10});
  CHECK(parse_shape("7") == Shape{7});
  CHECK_THROWS_AS(parse_shape("0,3"), ConfigError);
  CHECK_THROWS_AS(parse_shape("3,,4"), ConfigError);
  CHECK_THROWS_AS(parse_shape("a,b"), ConfigError);
  CHECK_THROWS_AS(parse_shape(""), ConfigError);
}

TEST_CASE("factorize writes trace, chart, and loadings; offline errors shrink") {
  TempDir tmp;
  const auto out = (tmp.path / "run").string();
  const int code = run({"factorize", "--method", "als", "--synthetic", "9,10,11", "--rank",
                        "3", "--sweeps", "12", "--seed", "4", "--out", out});
  CHECK(code == 0);
  const std::string csv = read_file(tmp.path / "run" / "trace.csv");
  const auto rows = csv_rows(csv);
  REQUIRE(rows.size() == 12);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(std::stod(rows[i][4]) <= std::stod(rows[i - 1][4]) + 1e-9);
  }
  CHECK(read_file(tmp.path / "run" / "error_curve.svg").find("<svg") != std::string::npos);
  CHECK(read_dtf1_matrix(tmp.path / "run" / "U1.dtf1").cols() == 3);
  CHECK(read_dtf1_matrix(tmp.path / "run" / "U3.dtf1").rows() == 11);
}

TEST_CASE("online factorize refits the sample mode and reports full-tensor error") {
  TempDir tmp;
  const auto out = (tmp.path / "run").string();
  const int code = run({"factorize", "--method", "ocpdl", "--synthetic", "8,9,40", "--rank",
                        "3", "--subsample", "5", "--T", "60", "--beta", "1", "--lambda", "0",
                        "--seed", "7", "--out", out});
  CHECK(code == 0);
  const auto rows = csv_rows(read_file(tmp.path / "run" / "trace.csv"));
  REQUIRE(rows.size() == 60);
  CHECK(std::stod(rows.back()[5]) < 0.3);                 // learned something
  CHECK(std::stod(rows.back()[5]) < std::stod(rows[0][5]));
  // All three factors exist even though the learner never sees mode 3 whole.
  CHECK(read_dtf1_matrix(tmp.path / "run" / "U3.dtf1").rows() == 40);
}

TEST_CASE("missing inputs exit 2 and leave no partial outputs") {
  TempDir tmp;
  const auto out = (tmp.path / "run").string();
  CHECK(run({"factorize", "--method", "als", "--tensor", (tmp.path / "no.dtf1").string(),
             "--rank", "2", "--out", out}) == 2);
  CHECK_FALSE(std::filesystem::exists(tmp.path / "run"));

  CHECK(run({"patches", "--image", (tmp.path / "no.ppm").string(), "--out", out}) == 2);
  CHECK_FALSE(std::filesystem::exists(tmp.path / "run"));

  // rank missing entirely
  CHECK(run({"factorize", "--method", "als", "--synthetic", "4,4,4", "--out", out}) == 2);
  CHECK_FALSE(std::filesystem::exists(tmp.path / "run"));

  // offline method without a full tensor
  CHECK(run({"factorize", "--method", "mu", "--stream_dir", tmp.path.string(), "--rank", "2",
             "--out", out}) == 2);
  CHECK_FALSE(std::filesystem::exists(tmp.path / "run"));
}

TEST_CASE("bad command lines and config files exit 2") {
  TempDir tmp;
  CHECK(run({}) == 2);
  CHECK(run({"frobnicate"}) == 2);
  CHECK(run({"factorize", "--bogus", "1"}) == 2);
  CHECK(run({"factorize", "--rank"}) == 2);  // missing value

  write_file(tmp.path / "bad.cfg", "rnak=3\n");
  CHECK(run({"factorize", "--config", (tmp.path / "bad.cfg").string()}) == 2);
  CHECK(run({"--help"}) == 0);
}

TEST_CASE("command-line options override config file values") {
  TempDir tmp;
  write_file(tmp.path / "run.cfg",
             "method=als\nsynthetic=6,7,8\nrank=2\nsweeps=4\nseed=1\nout=" +
                 (tmp.path / "a").string() + "\n");
  CHECK(run({"factorize", "--config", (tmp.path / "run.cfg").string()}) == 0);
  CHECK(read_dtf1_matrix(tmp.path / "a" / "U1.dtf1").cols() == 2);

  CHECK(run({"factorize", "--config", (tmp.path / "run.cfg").string(), "--rank", "4", "--out",
             (tmp.path / "b").string()}) == 0);
  CHECK(read_dtf1_matrix(tmp.path / "b" / "U1.dtf1").cols() == 4);
}

TEST_CASE("reruns with fixed seeds reproduce everything but the clock") {
  TempDir tmp;
  for (const char* name : {"x", "y"}) {
    CHECK(run({"factorize", "--method", "ocpdl", "--synthetic", "6,7,30", "--rank", "2",
               "--subsample", "4", "--T", "25", "--seed", "9", "--out",
               (tmp.path / name).string()}) == 0);
  }
  CHECK(drop_wall(read_file(tmp.path / "x" / "trace.csv")) ==
        drop_wall(read_file(tmp.path / "y" / "trace.csv")));
  for (const char* f : {"U1.dtf1", "U2.dtf1", "U3.dtf1"}) {
    CHECK(read_file(tmp.path / "x" / f) == read_file(tmp.path / "y" / f));
  }
}

TEST_CASE("bench runs every method x trial and stays deterministic under threads") {
  TempDir tmp;
  const std::vector<std::string> base = {"bench",   "--synthetic", "6,7,24",     "--rank", "2",
                                         "--subsample", "4",       "--T",        "8",      "--trials",
                                         "3",       "--seed",      "5"};
  auto with_out = [&](const char* name) {
    std::vector<std::string> args = base;
    args.emplace_back("--out");
    args.emplace_back((tmp.path / name).string());
    return args;
  };
  ::setenv("OCPDL_THREADS", "3", 1);
  CHECK(run_cli(with_out("p")) == 0);
  ::setenv("OCPDL_THREADS", "1", 1);
  CHECK(run_cli(with_out("q")) == 0);
  ::unsetenv("OCPDL_THREADS");

  const std::string csv = read_file(tmp.path / "p" / "trace.csv");
  const auto rows = csv_rows(csv);
  CHECK(rows.size() == 3 * 3 * 8);  // methods x trials x iterations
  CHECK(drop_wall(csv) == drop_wall(read_file(tmp.path / "q" / "trace.csv")));

  // every (method, trial) pair appears with the full iteration count
  std::map<std::string, int> counts;
  for (const auto& row : rows) counts[row[0] + "/" + row[1]]++;
  CHECK(counts.size() == 9);
  for (const auto& [key, n] : counts) CHECK(n == 8);

  ::setenv("OCPDL_THREADS", "0", 1);
  CHECK(run_cli(with_out("r")) == 2);
  ::unsetenv("OCPDL_THREADS");
}

TEST_CASE("a single-trial bench reproduces the factorize trace") {
  TempDir tmp;
  CHECK(run({"factorize", "--method", "ocpdl", "--synthetic", "6,6,20", "--rank", "2",
             "--subsample", "3", "--T", "10", "--seed", "11", "--out",
             (tmp.path / "solo").string()}) == 0);
  CHECK(run({"bench", "--methods", "ocpdl", "--trials", "1", "--synthetic", "6,6,20", "--rank",
             "2", "--subsample", "3", "--T", "10", "--seed", "11", "--out",
             (tmp.path / "duo").string()}) == 0);
  CHECK(drop_wall(read_file(tmp.path / "solo" / "trace.csv")) ==
        drop_wall(read_file(tmp.path / "duo" / "trace.csv")));
}

TEST_CASE("diagnose exits 0 on a healthy run, 1 on the frozen control, 2 on bad flags") {
  CHECK(run({"diagnose", "--synthetic", "5,5,20", "--rank", "2", "--T", "25", "--batch", "2",
             "--lambda", "0.3"}) == 0);
  CHECK(run({"diagnose", "--synthetic", "5,5,20", "--rank", "2", "--T", "25", "--batch", "2",
             "--lambda", "0.3", "--sweep", "frozen"}) == 1);
  CHECK(run({"diagnose", "--sweep", "sideways"}) == 2);
}

TEST_CASE("patches emits a stream directory that factorize can consume") {
  TempDir tmp;
  // 12 x 10 image with a smooth gradient
  DenseTensor img({12, 10, 3});
  for (std::int64_t i = 0; i < img.size(); ++i) img[i] = double(i % 97) / 96.0;
  ppm_write(img, tmp.path / "img.ppm");

  const auto dir = (tmp.path / "stream").string();
  CHECK(run({"patches", "--image", (tmp.path / "img.ppm").string(), "--patch", "5", "--T",
             "9", "--batch", "2", "--seed", "3", "--out", dir}) == 0);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    CHECK(e.path().extension() == ".dtf1");
    CHECK(read_dtf1(e.path()).shape() == Shape{5, 5, 3, 2});
    ++files;
  }
  CHECK(files == 9);

  CHECK(run({"factorize", "--method", "ocpdl", "--stream_dir", dir, "--rank", "3", "--T",
             "9", "--balanced", "1", "--out", (tmp.path / "run").string()}) == 0);
  const auto rows = csv_rows(read_file(tmp.path / "run" / "trace.csv"));
  CHECK(rows.size() == 9);
  CHECK(rows.back()[4].empty());  // no reference tensor -> empty error fields
  CHECK(rows.back()[5].empty());
}

TEST_CASE("markov sources drive the online method end to end") {
  TempDir tmp;
  DenseTensor obs0({4, 3});
  DenseTensor obs1({4, 3});
  for (std::int64_t i = 0; i < obs0.size(); ++i) {
    obs0[i] = double(i) / double(obs0.size());
    obs1[i] = 1.0 - obs0[i];
  }
  write_dtf1(obs0, tmp.path / "s0.dtf1");
  write_dtf1(obs1, tmp.path / "s1.dtf1");
  write_file(tmp.path / "chain.txt", "2\n0.5 0.5\n0.25 0.75\ns0.dtf1\ns1.dtf1\n");

  CHECK(run({"factorize", "--method", "ocpdl", "--markov",
             (tmp.path / "chain.txt").string(), "--rank", "2", "--T", "15", "--batch", "3",
             "--balanced", "1", "--out", (tmp.path / "run").string()}) == 0);
  const auto rows = csv_rows(read_file(tmp.path / "run" / "trace.csv"));
  CHECK(rows.size() == 15);
  CHECK(read_dtf1_matrix(tmp.path / "run" / "U1.dtf1").rows() == 4);
  CHECK(read_dtf1_matrix(tmp.path / "run" / "U2.dtf1").rows() == 3);
}
