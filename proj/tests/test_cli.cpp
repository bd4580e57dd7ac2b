// End-to-end checks of the command-line tool: the synth -> train ->
// estimate -> evaluate flow, config echo fidelity, and exit codes. The
// binary path arrives through the CLI_PATH compile definition.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::current_path() / "cli_test_work";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(CLI_PATH) + " " + args +
                          " >>" + (work_dir() / "stdout.log").string() +
                          " 2>>" + (work_dir() / "stderr.log").string();
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string p(const char* name) { return (work_dir() / name).string(); }

// Small, fast settings shared by every training run below.
const std::string kSmall =
    " --set synth.instances=6 --set synth.test_instances=3"
    " --set synth.sensors=3 --set synth.life_min=40 --set synth.life_max=60"
    " --set synth.seed=11 --set model.w=8 --set model.c=6 --set model.d=0"
    " --set model.p=0 --set train.epochs=6 --set match.tau=20"
    " --set data.format=csv";

}  // namespace

TEST_CASE("synth, train, estimate, evaluate flow") {
  REQUIRE(run("synth --out-train " + p("train.csv") + " --out-test " +
              p("test.csv") + " --out-rul " + p("rul.txt") + kSmall) == 0);
  CHECK(fs::exists(p("train.csv")));
  CHECK(fs::exists(p("test.csv")));
  CHECK(fs::exists(p("rul.txt")));
  CHECK(fs::exists(p("train.csv") + ".config.ini"));

  REQUIRE(run("train -o " + p("ckpt.json") + kSmall + " --set data.train=" +
              p("train.csv") + " --history " + p("loss.csv")) == 0);
  CHECK(fs::exists(p("ckpt.json")));
  CHECK(fs::exists(p("ckpt.json") + ".config.ini"));
  CHECK(slurp(p("loss.csv")).rfind("epoch,loss", 0) == 0);

  REQUIRE(run("estimate -k " + p("ckpt.json") + kSmall +
              " --set data.test=" + p("test.csv") +
              " --set data.rul=" + p("rul.txt") + " -o " + p("report.csv")) == 0);
  const std::string report = slurp(p("report.csv"));
  CHECK(report.rfind("instance,t,estimate,actual,error,fallback_used,"
                     "n_candidates", 0) == 0);

  REQUIRE(run("evaluate -r " + p("report.csv") + " -o " + p("metrics.csv")) == 0);
  const std::string metrics = slurp(p("metrics.csv"));
  CHECK(metrics.rfind("s,accuracy_pct,mae,mse,mape_pct,fpr_pct,fnr_pct,n,"
                      "mape_excluded", 0) == 0);
}

TEST_CASE("fresh evaluation equals evaluation of the written report") {
  REQUIRE(run("evaluate -k " + p("ckpt.json") + kSmall +
              " --set data.test=" + p("test.csv") +
              " --set data.rul=" + p("rul.txt") + " -o " +
              p("metrics_fresh.csv")) == 0);
  CHECK(slurp(p("metrics_fresh.csv")) == slurp(p("metrics.csv")));
}

TEST_CASE("the echoed config reproduces the run byte for byte") {
  REQUIRE(run("train -c " + p("ckpt.json") + ".config.ini -o " +
              p("ckpt2.json")) == 0);
  CHECK(slurp(p("ckpt2.json")) == slurp(p("ckpt.json")));

  // And the echo of the rerun matches the original echo.
  CHECK(slurp(p("ckpt2.json") + ".config.ini") ==
        slurp(p("ckpt.json") + ".config.ini"));
}

TEST_CASE("estimates are reproducible and land on stdout when unrouted") {
  REQUIRE(run("estimate -k " + p("ckpt.json") + kSmall +
              " --set data.test=" + p("test.csv") +
              " --set data.rul=" + p("rul.txt") + " -o " + p("report2.csv")) == 0);
  CHECK(slurp(p("report2.csv")) == slurp(p("report.csv")));
}

TEST_CASE("noise sweep and exports run from the checkpoint alone") {
  REQUIRE(run("noise-sweep -k " + p("ckpt.json") + kSmall +
              " --set data.test=" + p("test.csv") +
              " --set data.rul=" + p("rul.txt") +
              " --sigmas 0,0.1 --sweep-seed 5 -o " + p("sweep.csv")) == 0);
  CHECK(slurp(p("sweep.csv")).rfind("sigma,mse,s,estimable", 0) == 0);

  REQUIRE(run("export -k " + p("ckpt.json") + kSmall +
              " --set data.test=" + p("test.csv") +
              " --what hi --scorer recon -o " + p("hi.csv")) == 0);
  CHECK(slurp(p("hi.csv")).rfind("instance,t,hi", 0) == 0);

  REQUIRE(run("export -k " + p("ckpt.json") + kSmall +
              " --set data.train=" + p("train.csv") +
              " --data train --what embeddings -o " + p("emb.csv")) == 0);
  CHECK(slurp(p("emb.csv")).rfind("instance,t,e1", 0) == 0);
}

TEST_CASE("grid search emits a runnable winning config") {
  REQUIRE(run("grid-search -o " + p("best.ini") + kSmall +
              " --set data.train=" + p("train.csv") +
              " --set train.epochs=3 --set validate.truncations=2" +
              " --set grid.match.alpha=0.5,0.95 --cells " + p("cells.csv")) == 0);
  const std::string cells = slurp(p("cells.csv"));
  CHECK(cells.rfind("match.alpha,objective,estimable,best", 0) == 0);
  const std::string best = slurp(p("best.ini"));
  CHECK(best.find("[match]") != std::string::npos);

  // The winning config is directly trainable.
  REQUIRE(run("train -c " + p("best.ini") + " -o " + p("ckpt_best.json")) == 0);
}

TEST_CASE("failures map to documented exit codes") {
  // Unknown config key: configuration error -> 2.
  CHECK(run("train -o " + p("x.json") + " --set model.bogus=1") == 2);
  // Missing training data file -> 2.
  CHECK(run("train -o " + p("x.json") +
            " --set data.format=csv --set data.train=" + p("nope.csv")) == 2);
  // Corrupt checkpoint -> 3 (format error).
  {
    std::ofstream out(p("broken.json"));
    out << "{\"format\": \"other\"}";
  }
  CHECK(run("estimate -k " + p("broken.json") + kSmall +
            " --set data.test=" + p("test.csv")) == 3);
  // Malformed data file -> 3 (parse error).
  {
    std::ofstream out(p("broken.csv"));
    out << "instance,timestamp\nonly,two,cells,here\n";
  }
  CHECK(run("train -o " + p("x.json") +
            " --set data.format=csv --set data.train=" + p("broken.csv")) == 3);
  // Bad command line -> CLI11's own nonzero exit.
  CHECK(run("no-such-command") != 0);
  CHECK(run("train") != 0);  // missing required -o
}
