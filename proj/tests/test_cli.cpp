#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "commands.hpp"

using evagraph::cli::run;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path tmp() {
  static const fs::path dir = [] {
    const char* env = std::getenv("EVAGRAPH_TEST_TMP");
    fs::path d = env && *env ? fs::path(env) : fs::temp_directory_path() / "evagraph_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string p(const std::string& name) { return (tmp() / name).string(); }

std::string bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  return json::parse(in);
}

// Graph and weights shared by the attack tests.
void fixtures() {
  static const bool ready = [] {
    REQUIRE(run({"synth", "--blocks", "3", "--block-size", "30", "--p-in", "0.15", "--p-out", "0.01", "--features",
                 "8", "--train", "0.2", "--val", "0.2", "--test", "0.3", "--seed", "7", "--out", p("toy.grph")}) == 0);
    REQUIRE(run({"train", "--graph", p("toy.grph"), "--model", "gcn", "--seed", "1", "--hidden", "16", "--out",
                 p("toy_w.grph")}) == 0);
    return true;
  }();
  (void)ready;
}

std::vector<std::string> attack_args(std::vector<std::string> extra) {
  std::vector<std::string> a{"attack",  "--graph", p("toy.grph"), "--weights",     p("toy_w.grph"), "--population",
                             "16",      "--steps", "5",           "--results-dir", p("results")};
  a.insert(a.end(), extra.begin(), extra.end());
  return a;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  fixtures();
  CHECK(run({}) == 2);
  CHECK(run({"frobnicate"}) == 2);
  CHECK(run({"attack", "--no-such-flag"}) == 2);
  CHECK(run(attack_args({"--mode", "local"})) == 2);
  CHECK(run(attack_args({"--mode", "global", "--e-loc", "0.5"})) == 2);
  CHECK(run(attack_args({"--mode", "targeted"})) == 2);
  CHECK(run(attack_args({"--mode", "sideways"})) == 2);
  CHECK(run(attack_args({"--objective", "nope"})) == 2);
  CHECK(run(attack_args({"--epsilon", "1.5"})) == 2);
  CHECK(run(attack_args({"--mutation-rate", "2"})) == 2);
  CHECK(run({"synth", "--p-in", "1.5", "--out", p("bad.grph")}) == 2);
  CHECK(run({"synth"}) == 2);
  CHECK(run({"--help"}) == 0);
}

TEST_CASE("missing inputs are runtime errors") {
  CHECK(run({"train", "--graph", p("absent.grph"), "--out", p("w.grph")}) == 1);
  CHECK(run({"report", p("nothing_here_*.json")}) == 1);
}

TEST_CASE("synth is deterministic") {
  REQUIRE(run({"synth", "--seed", "7", "--out", p("s1.grph")}) == 0);
  REQUIRE(run({"synth", "--seed", "7", "--out", p("s2.grph")}) == 0);
  REQUIRE(run({"synth", "--seed", "8", "--out", p("s3.grph")}) == 0);
  CHECK(bytes(p("s1.grph")) == bytes(p("s2.grph")));
  CHECK(bytes(p("s1.grph")) != bytes(p("s3.grph")));
}

TEST_CASE("training with the same seed writes identical weights") {
  fixtures();
  for (const auto* name : {"w1.grph", "w2.grph"}) {
    REQUIRE(run({"train", "--graph", p("toy.grph"), "--model", "mlp", "--seed", "3", "--hidden", "8", "--epochs", "40",
                 "--out", p(name)}) == 0);
  }
  CHECK(bytes(p("w1.grph")) == bytes(p("w2.grph")));
  const auto report = read_json(p("w1.grph") + ".report.json");
  CHECK(report.at("config").at("model") == "mlp");
  CHECK(report.contains("test_accuracy"));
}

TEST_CASE("global attack writes a result within budget") {
  fixtures();
  REQUIRE(run(attack_args({"--epsilon", "0.1", "--seed", "2", "--out", p("global.json")})) == 0);
  const auto doc = read_json(p("global.json"));
  CHECK(doc.at("mode") == "global");
  CHECK(doc.at("config").at("dataset") == "toy");
  CHECK(doc.at("config").at("model") == "gcn");
  CHECK(doc.at("flips").size() <= doc.at("delta").get<std::size_t>());
  CHECK(doc.at("telemetry").size() == 6);
  CHECK(doc.at("attacked_metrics").at("accuracy").get<double>() <= doc.at("clean_metrics").at("accuracy").get<double>());
}

TEST_CASE("config echo reproduces the run") {
  fixtures();
  REQUIRE(run(attack_args({"--epsilon", "0.1", "--seed", "4", "--mutation", "uniform", "--out", p("first.json")})) == 0);
  REQUIRE(run({"attack", "--config", p("first.json"), "--out", p("second.json")}) == 0);
  auto a = read_json(p("first.json"));
  auto b = read_json(p("second.json"));
  a.erase("wall_seconds");
  b.erase("wall_seconds");
  a["config"].erase("out");
  b["config"].erase("out");
  CHECK(a == b);
}

TEST_CASE("flags override a config file") {
  fixtures();
  json cfg = {{"epsilon", 0.2}, {"ga", {{"population", 8}, {"steps", 2}}}};
  std::ofstream(p("cfg.json")) << cfg.dump();
  REQUIRE(run({"attack", "--config", p("cfg.json"), "--graph", p("toy.grph"), "--weights", p("toy_w.grph"), "--steps",
               "3", "--out", p("override.json")}) == 0);
  const auto doc = read_json(p("override.json"));
  CHECK(doc.at("config").at("epsilon") == 0.2);
  CHECK(doc.at("config").at("ga").at("population") == 8);
  CHECK(doc.at("config").at("ga").at("steps") == 3);
  CHECK(doc.at("telemetry").size() == 4);
}

TEST_CASE("other attack modes") {
  fixtures();
  REQUIRE(run(attack_args({"--mode", "targeted", "--node", "5", "--max-budget", "3", "--out", p("t.json")})) == 0);
  const auto t = read_json(p("t.json"));
  CHECK(t.at("target") == 5);
  CHECK((t.at("minimal_budget").is_number() || t.at("minimal_budget") == "NA"));

  REQUIRE(run(attack_args({"--mode", "dnc", "--k-dc", "2", "--epsilon", "0.1", "--out", p("d.json")})) == 0);
  CHECK(read_json(p("d.json")).at("chunks").size() == 2);

  REQUIRE(run(attack_args({"--mode", "local", "--e-loc", "0.5", "--out", p("l.json")})) == 0);
  CHECK(read_json(p("l.json")).at("mode") == "local");

  REQUIRE(run(attack_args({"--mode", "random", "--trials", "20", "--out", p("r.json")})) == 0);
  CHECK(read_json(p("r.json")).at("evaluations") == 20);

  REQUIRE(run(attack_args({"--objective", "conformal-coverage", "--targets", "test", "--out", p("c.json")})) == 0);
  CHECK(read_json(p("c.json")).at("primary_metric") == "coverage");
}

TEST_CASE("seed sweeps and the report command") {
  fixtures();
  const auto dir = tmp() / "sweep";
  REQUIRE(run({"attack", "--graph", p("toy.grph"), "--weights", p("toy_w.grph"), "--population", "16", "--steps", "5",
               "--seed", "1", "--seed", "2", "--seed", "3", "--jobs", "2", "--results-dir", dir.string()}) == 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) files += e.path().extension() == ".json" ? 1 : 0;
  CHECK(files == 3);

  REQUIRE(run({"report", (dir / "*seed1.json").string(), "--csv", p("one.csv")}) == 0);
  const auto one = bytes(p("one.csv"));
  CHECK(std::count(one.begin(), one.end(), '\n') == 2);
  CHECK(one.rfind("dataset,model,objective,epsilon,seed,clean,attacked\ntoy,gcn,accuracy,0.05,1,", 0) == 0);

  REQUIRE(run({"report", (dir / "*.json").string(), "--csv", p("all.csv"), "--plot", p("plot.json")}) == 0);
  const auto plot = read_json(p("plot.json"));
  CHECK(plot.at("accuracy").at(0).at("runs") == 3);

  std::ofstream(dir / "zz_broken.json") << "{";
  CHECK(run({"report", (dir / "*.json").string()}) == 1);
}

TEST_CASE("results directory defaults to the environment variable") {
  fixtures();
  const auto dir = tmp() / "env_results";
  ::setenv("EVAGRAPH_RESULTS_DIR", dir.c_str(), 1);
  CHECK(evagraph::cli::results_root() == dir);
  REQUIRE(run({"attack", "--graph", p("toy.grph"), "--weights", p("toy_w.grph"), "--population", "8", "--steps", "1",
               "--seed", "9"}) == 0);
  ::unsetenv("EVAGRAPH_RESULTS_DIR");
  CHECK(fs::exists(dir / "toy_gcn_accuracy_global_eps0.05_seed9.json"));
  CHECK(evagraph::cli::results_root() == fs::path("results"));
}
