#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kTmp = fs::temp_directory_path() / "tomo_cli_test";

std::string config(const std::string& name) { return std::string(TOMO_CONFIG_DIR) + "/" + name; }

int run(const std::string& args, const std::string& out = "", const std::string& err = "") {
  std::string cmd = std::string(TOMO_CLI_PATH) + " " + args;
  if (!out.empty()) cmd += " --out " + (kTmp / out).string();
  cmd += " 2>" + (err.empty() ? std::string("/dev/null") : (kTmp / err).string());
  if (out.empty()) cmd += " >/dev/null";
  int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const std::string& name) {
  std::ifstream in(kTmp / name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string write_ini(const std::string& name, const std::string& body) {
  fs::create_directories(kTmp);
  std::ofstream(kTmp / name) << body;
  return (kTmp / name).string();
}

struct Setup {
  Setup() { fs::create_directories(kTmp); }
};
const Setup setup;

}  // namespace

TEST_CASE("recipes run") {
  const std::pair<const char*, const char*> recipes[] = {
      {"trine_mlme.ini", "estimate-state"},        {"tetra_ml.ini", "estimate-state"},
      {"witness_scan.ini", "witness-scan"},        {"werner_adaptive.ini", "detect-entanglement"},
      {"qpt_cnot_noiseless.ini", "estimate-process"}, {"qpt_imperfect_fixed.ini", "estimate-process"},
      {"qpt_imperfect_mpl.ini", "estimate-process"},  {"cv_laser_depth.ini", "cv"},
      {"cv_cat_sh.ini", "cv"},                     {"benchmark_tetra.ini", "benchmark"},
  };
  for (auto [file, cmd] : recipes) {
    CAPTURE(file);
    CHECK(run("--config " + config(file) + " " + cmd, std::string(file) + ".out") == 0);
  }
}

TEST_CASE("trine artifact") {
  REQUIRE(run("--config " + config("trine_mlme.ini") + " estimate-state", "trine.json") == 0);
  auto j = nlohmann::json::parse(slurp("trine.json"));
  auto b = j["result"]["bloch"];
  CHECK(b[0].get<double>() == doctest::Approx(0.194).epsilon(0.003 / 0.194));
  CHECK(std::abs(b[1].get<double>()) < 1e-6);
  CHECK(b[2].get<double>() == doctest::Approx(0.981).epsilon(0.003));
  CHECK_FALSE(j["classical_me"]["feasible"].get<bool>());
}

TEST_CASE("witness census output") {
  REQUIRE(run("--config " + config("witness_scan.ini") + " witness-scan", "scan.csv", "scan.err") == 0);
  std::string csv = slurp("scan.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 18565);
  CHECK(slurp("scan.err").find("candidates=18564 ic=1395 classes=6") != std::string::npos);
}

TEST_CASE("noiseless CNOT sweep") {
  REQUIRE(run("--config " + config("qpt_cnot_noiseless.ini") + " estimate-process", "cnot.csv") == 0);
  std::istringstream in(slurp("cnot.csv"));
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  REQUIRE(last.rfind("16,16,", 0) == 0);
  double dist = std::stod(last.substr(6, last.find(',', 6) - 6));
  CHECK(dist <= 1e-3);
}

TEST_CASE("exit codes") {
  CHECK(run("--config " + write_ini("nopom.ini", "[state]\ncounts = 1,2,3\n") + " estimate-state") == 2);
  CHECK(run("--config " + write_ini("badch.ini", "[process]\nchannel = swap\n") + " estimate-process") == 2);
  CHECK(run("--config " + write_ini("badkey.ini", "[state]\npom = trine\ncolour = red\n") + " estimate-state") == 2);
  CHECK(run("--config " + write_ini("dup.ini", "[state]\npom = trine\npom = bell\n") + " estimate-state") == 2);
  CHECK(run("--no-such-flag estimate-state") == 2);
  CHECK(run("--config /nonexistent/x.ini estimate-state") == 2);
  // Linear inversion needs an informationally complete POM.
  CHECK(run("--config " + write_ini("li.ini", "[state]\npom = trine\ncounts = 6,2,1\nestimator = li\n") +
            " estimate-state") == 1);
}

TEST_CASE("property: outputs are functions of config and seed") {
  for (auto seed : testing::kSeeds) {
    CAPTURE(seed);
    const std::string s = " --seed " + std::to_string(seed) + " ";
    REQUIRE(run("--config " + config("tetra_ml.ini") + s + "estimate-state", "a.json") == 0);
    REQUIRE(run("--config " + config("tetra_ml.ini") + s + "estimate-state", "b.json") == 0);
    CHECK(slurp("a.json") == slurp("b.json"));
    REQUIRE(run("--config " + config("benchmark_tetra.ini") + s + "--threads 1 benchmark", "c.csv") == 0);
    REQUIRE(run("--config " + config("benchmark_tetra.ini") + s + "--threads 3 benchmark", "d.csv") == 0);
    CHECK(slurp("c.csv") == slurp("d.csv"));
    REQUIRE(run("--config " + config("werner_adaptive.ini") + s + "detect-entanglement", "e.json") == 0);
    REQUIRE(run("--config " + config("werner_adaptive.ini") + s + "detect-entanglement", "f.json") == 0);
    CHECK(slurp("e.json") == slurp("f.json"));
  }
  REQUIRE(run("--config " + config("tetra_ml.ini") + " --seed 11 estimate-state", "g.json") == 0);
  CHECK(slurp("g.json") != slurp("a.json"));
}
