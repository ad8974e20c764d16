#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>

namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "deepfactor_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Result cli(const std::string& args) {
  const fs::path out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
  const std::string cmd = std::string("\"") + DEEPFACTOR_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path write(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("usage errors") {
  CHECK(cli("--help").code == 0);
  CHECK(cli("--version").code == 0);
  CHECK(cli("").code == 2);
  CHECK(cli("frobnicate").code == 2);
  CHECK(cli("infer").code == 2);
  CHECK(cli("--config /nonexistent/cfg.json generate").code == 2);
}

TEST_CASE("generate with defaults writes a 16 x 200 dataset and is reproducible") {
  const fs::path a = scratch() / "gen_a.csv", b = scratch() / "gen_b.csv";
  REQUIRE(cli("generate --seed 5 --out " + q(a)).code == 0);
  REQUIRE(cli("generate --seed 5 --out " + q(b)).code == 0);
  const std::string text = slurp(a);
  CHECK(count_lines(text) == 17);
  const std::string header = text.substr(0, text.find('\n'));
  CHECK(header.rfind("t0,t1,", 0) == 0);
  CHECK(header.substr(header.rfind(',') + 1) == "t199");
  CHECK(text == slurp(b));
  CHECK(fs::exists(scratch() / "gen_a.json"));
  CHECK(slurp(scratch() / "gen_a.json") == slurp(scratch() / "gen_b.json"));

  const fs::path c = scratch() / "gen_c.csv";
  REQUIRE(cli("generate --seed 6 --out " + q(c)).code == 0);
  CHECK(slurp(c) != text);
}

TEST_CASE("generate without hidden factors gives near-zero data") {
  const auto cfg = write("zero.json", R"({"data": {"N": 4, "T": 10}, "model": {"layer_widths": [0]}})");
  const fs::path out = scratch() / "zero.csv";
  REQUIRE(cli("--config " + q(cfg) + " generate --seed 1 --out " + q(out)).code == 0);
  std::istringstream in(slurp(out));
  std::string line;
  std::getline(in, line);
  double max_abs = 0.0;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) max_abs = std::max(max_abs, std::abs(std::stod(f)));
  }
  CHECK(max_abs < 1e-4);
}

TEST_CASE("five-iteration smoke run on the toy dataset") {
  const auto cfg = write("smoke.json", R"({"inference": {"iterations": 5}})");
  const fs::path out = scratch() / "smoke_out";
  const auto r = cli("--config " + q(cfg) + " --seed 3 --out " + q(out) + " infer " + q(DEEPFACTOR_TOY_DATA));
  REQUIRE(r.code == 0);
  const std::string trace = slurp(out / "trace.csv");
  CHECK(trace.rfind("iteration,K,log_joint,accepted_adds,accepted_deletes\n", 0) == 0);
  CHECK(count_lines(trace) == 6);
  CHECK(fs::exists(out / "state.json"));
  CHECK(r.out.find("5 iterations") != std::string::npos);
}

TEST_CASE("infer is deterministic for a fixed seed") {
  const auto cfg = write("det.json", R"({"inference": {"iterations": 10}})");
  const fs::path a = scratch() / "det_a", b = scratch() / "det_b";
  REQUIRE(cli("--config " + q(cfg) + " --seed 11 --out " + q(a) + " infer " + q(DEEPFACTOR_TOY_DATA)).code == 0);
  REQUIRE(cli("--config " + q(cfg) + " --seed 11 --out " + q(b) + " infer " + q(DEEPFACTOR_TOY_DATA)).code == 0);
  CHECK(slurp(a / "trace.csv") == slurp(b / "trace.csv"));
  CHECK(slurp(a / "state.json") == slurp(b / "state.json"));
}

TEST_CASE("two-layer inference writes one trace per layer") {
  const auto cfg = write("deep.json", R"({"inference": {"iterations": 3, "layerwise_outer_loops": 2}})");
  const fs::path out = scratch() / "deep_out";
  const auto r = cli("--config " + q(cfg) + " --seed 2 --depth 2 --out " + q(out) + " infer " + q(DEEPFACTOR_TOY_DATA));
  REQUIRE(r.code == 0);
  CHECK(fs::exists(out / "trace.csv"));
  CHECK(r.out.find("layer 1") != std::string::npos);
}

TEST_CASE("malformed CSV fails with a diagnostic naming the line") {
  const auto bad = write("bad.csv", "t0,t1,t2\n1,2,3\n4,five,6\n");
  const auto r = cli("--seed 1 --out " + q(scratch() / "bad_out") + " infer " + q(bad));
  CHECK(r.code == 2);
  CHECK(r.err.find("bad.csv:3") != std::string::npos);

  const auto ragged = write("ragged.csv", "t0,t1\n1,2\n3\n");
  CHECK(cli("--seed 1 infer " + q(ragged)).err.find("ragged.csv:3") != std::string::npos);
}

TEST_CASE("bad config is a usage error") {
  const auto cfg = write("typo.json", R"({"inference": {"iteratoins": 5}})");
  const auto r = cli("--config " + q(cfg) + " --seed 1 infer " + q(DEEPFACTOR_TOY_DATA));
  CHECK(r.code == 2);
  CHECK(r.err.find("iteratoins") != std::string::npos);
}

TEST_CASE("missing seed is drawn from entropy and reported") {
  const auto r = cli("generate --out " + q(scratch() / "entropy.csv"));
  CHECK(r.code == 0);
  CHECK(r.err.find("entropy") != std::string::npos);
}

TEST_CASE("tiny experiment: fast, and --jobs does not change the summary") {
  const auto cfg = write("tiny.json", R"({"experiment": {"K_true": [3], "iterations": 5, "replicates": 2}})");
  const fs::path a = scratch() / "exp_a", b = scratch() / "exp_b";
  const auto start = std::chrono::steady_clock::now();
  REQUIRE(cli("--config " + q(cfg) + " --seed 4 --jobs 1 --out " + q(a) + " experiment").code == 0);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(seconds < 30.0);
  REQUIRE(cli("--config " + q(cfg) + " --seed 4 --jobs 8 --out " + q(b) + " experiment").code == 0);
  CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));
  CHECK(count_lines(slurp(a / "summary.csv")) == 4);
  for (const auto& entry : fs::directory_iterator(a / "traces"))
    CHECK(slurp(entry.path()) == slurp(b / "traces" / entry.path().filename()));
  CHECK(fs::exists(a / "manifest.json"));
}

TEST_CASE("validate fails when the closed form is perturbed") {
  const auto r = cli("validate --perturb-closed-form 1e-4");
  CHECK(r.code == 1);
  CHECK(r.out.find("FAIL") != std::string::npos);
}
