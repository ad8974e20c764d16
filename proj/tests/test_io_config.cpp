#include <cmath>
#include <filesystem>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "deepfactor/config.hpp"
#include "deepfactor/error.hpp"
#include "deepfactor/io.hpp"

using namespace deepfactor;

namespace {

std::string parse_error(std::string_view text) {
  try {
    io::parse_matrix_csv(text, "data.csv");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
    return e.what();
  }
  return {};
}

std::string config_error(std::string_view text) {
  try {
    config::parse_run_config(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("doubles round-trip through their text form") {
  for (double v : {0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0, -0.0}) {
    const std::string s = io::format_double(v);
    CHECK(std::stod(s) == v);
    CHECK(s.find(',') == std::string::npos);
  }
}

TEST_CASE("matrix CSV round trip") {
  Eigen::MatrixXd m(2, 3);
  m << 1.5, -2.25, 1.0 / 7.0, 0.0, 1e-12, -3.0;
  const FactorMatrix X(m);
  const std::string text = io::matrix_csv(X);
  CHECK(text.rfind("t0,t1,t2\n", 0) == 0);
  CHECK(io::parse_matrix_csv(text, "mem") == X);

  const auto dir = std::filesystem::temp_directory_path() / "deepfactor_io_test";
  std::filesystem::create_directories(dir);
  io::atomic_write(dir / "x.csv", text);
  CHECK(io::read_matrix_csv(dir / "x.csv") == X);
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed CSV names the offending line") {
  CHECK(parse_error("").find("data.csv:1") != std::string::npos);
  CHECK(parse_error("t0,t2\n1,2\n").find("data.csv:1") != std::string::npos);
  CHECK(parse_error("t0,t1\n1,2\n3\n").find("data.csv:3") != std::string::npos);
  CHECK(parse_error("t0,t1\n1,2\n3,abc\n").find("data.csv:3") != std::string::npos);
  CHECK(parse_error("t0,t1\n1,nan\n").find("data.csv:2") != std::string::npos);
  CHECK_THROWS_AS(io::read_matrix_csv("/nonexistent/deepfactor.csv"), Error);
}

TEST_CASE("trace CSV layout") {
  std::vector<infer::TraceRow> trace(2);
  trace[0] = {1, 3, 2, -10.5, 1, 0};
  trace[1] = {2, 2, 2, -9.25, 0, 1};
  CHECK(io::trace_csv(trace) ==
        "iteration,K,log_joint,accepted_adds,accepted_deletes\n1,3,-10.5,1,0\n2,2,-9.25,0,1\n");
}

TEST_CASE("dataset sidecar describes the true model") {
  const HyperParams h = HyperParams::single_layer(3, {3.0, 2.0, 1.0});
  Rng rng(4);
  const auto model = sample_model(h, 5, rng);
  const auto layers = generate_dataset(model, 7, rng);
  const auto j = nlohmann::json::parse(io::dataset_sidecar_json(model, layers, 4));
  CHECK(j["seed"] == 4);
  CHECK(j["true_K"] == nlohmann::json::array({3}));
  CHECK(j["layers"].size() == 1);
  CHECK(j["layers"][0]["mask"].size() == 5);
}

TEST_CASE("run config defaults match the reference study") {
  const auto cfg = config::parse_run_config("{}");
  CHECK(cfg.N == 16);
  CHECK(cfg.T == 200);
  CHECK(cfg.hyper.alpha_ibp_per_layer == std::vector<double>{3.0});
  CHECK(cfg.hyper.ig_shape_per_layer == std::vector<double>{2.0});
  CHECK(cfg.hyper.ig_scale_per_layer == std::vector<double>{1.0});
  CHECK(cfg.inference.iterations == 200);
  CHECK(cfg.experiment.replicates == 10);
  CHECK(cfg.experiment.iterations == 200);
  CHECK(cfg.experiment.K_true.front() == 3);
  CHECK(cfg.experiment.K_true.back() == 10);
  REQUIRE(cfg.experiment.inits.size() == 3);
  CHECK(cfg.experiment.inits[0] == infer::InitStrategy::fixed(2));
  CHECK(cfg.experiment.inits[1] == infer::InitStrategy::fixed(10));
  CHECK(cfg.experiment.inits[2] == infer::InitStrategy::uniform(3, 10));
  CHECK_FALSE(cfg.seed.has_value());
}

TEST_CASE("run config parsing") {
  const auto cfg = config::parse_run_config(R"({
    "seed": 12,
    "data": {"N": 8, "T": 50},
    "model": {"num_layers": 2, "layer_widths": [3, 2], "alpha_ibp": [3, 1.5], "ig_shape": 2, "ig_scale": 1},
    "inference": {"iterations": 5, "init": "uniform:2:4", "depth": 2},
    "experiment": {"K_true": [3], "replicates": 2, "iterations": 5, "inits": ["fixed:2"]}
  })");
  CHECK(*cfg.seed == 12);
  CHECK(cfg.N == 8);
  CHECK(cfg.hyper.num_layers == 2);
  CHECK(cfg.hyper.alpha_ibp_per_layer == std::vector<double>{3.0, 1.5});
  CHECK(cfg.hyper.ig_shape_per_layer == std::vector<double>{2.0, 2.0});
  CHECK(cfg.inference.init == infer::InitStrategy::uniform(2, 4));
  CHECK(cfg.depth == 2);
  CHECK(cfg.experiment.N == 8);
  CHECK(cfg.experiment.T == 50);
  CHECK(cfg.experiment.inits.size() == 1);

  // The canonical echo parses back to the same values.
  const auto again = config::parse_run_config(config::to_json(cfg));
  CHECK(config::to_json(again) == config::to_json(cfg));
}

TEST_CASE("run config errors") {
  CHECK(config_error("{").find("not valid JSON") != std::string::npos);
  CHECK(config_error(R"({"modle": {}})").find("unknown key 'modle'") != std::string::npos);
  CHECK(config_error(R"({"data": {"N": -1}})").find("data.N") != std::string::npos);
  CHECK(config_error(R"({"data": {"N": 0}})").find("data.N") != std::string::npos);
  CHECK(config_error(R"({"model": {"alpha_ibp": 0}})") != "");
  CHECK(config_error(R"({"inference": {"init": "fixed:x"}})").find("fixed:x") != std::string::npos);
  CHECK(config_error(R"({"inference": {"init": "uniform:5:3"}})").find("empty range") != std::string::npos);
  CHECK(config_error(R"({"experiment": {"burn_in": 1.5}})") != "");
  CHECK(config_error(R"({"seed": -3})").find("seed") != std::string::npos);
  CHECK_THROWS_AS(config::load_run_config("/nonexistent/cfg.json"), Error);
}

TEST_CASE("init specs") {
  CHECK(config::parse_init("fixed:2") == infer::InitStrategy::fixed(2));
  CHECK(config::parse_init("uniform:3:10") == infer::InitStrategy::uniform(3, 10));
  CHECK_THROWS_AS(config::parse_init("gaussian:3"), Error);
  CHECK_THROWS_AS(config::parse_init("uniform:3"), Error);
}
