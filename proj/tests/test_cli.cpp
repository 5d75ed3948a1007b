#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("kukles_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome run(const std::string& args) {
  const fs::path out = scratch() / "stdout", err = scratch() / "stderr";
  const std::string cmd =
      std::string("\"") + KUKLES_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
  const int st = std::system(cmd.c_str());
  Outcome r;
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path write_file(const std::string& name, const std::string& body) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST(Cli, SingularitiesOfCaseOne) {
  const Outcome r = run("singularities --q-case 1 --a 2");
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j["format_version"], "1");
  ASSERT_EQ(j["finite"].size(), 3u);
  EXPECT_EQ(j["finite"][0]["kind"], "center-candidate");
  EXPECT_EQ(j["finite"][1]["kind"], "saddle");
  EXPECT_EQ(j["finite"][2]["kind"], "center-candidate");
  EXPECT_EQ(j["finite"][2]["x"], 2.0);
  EXPECT_TRUE(j.contains("infinite"));
}

TEST(Cli, HopfPrintsCriticalValue) {
  const Outcome r = run("hopf --free beta --alpha0 0.1");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "beta = 0.1\n");
  // 0.3 - 0.1 is not 0.2 in binary; the printed value round-trips the computed double.
  const Outcome g = run("hopf --free gamma --alpha0 0.1 --beta 0.3");
  ASSERT_EQ(g.out.rfind("gamma = ", 0), 0u) << g.out;
  EXPECT_NEAR(std::stod(g.out.substr(8)), 0.2, 1e-12);
}

TEST(Cli, ToleranceIsEchoed) {
  const Outcome r = run("singularities --rtol 1e-10");
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j["config"]["integrator"]["rtol"], 1e-10);
  EXPECT_EQ(j["config"]["cycles"]["rtol"], 1e-10);
  EXPECT_EQ(j["config"]["homoclinic"]["rtol"], 1e-10);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("singularities --q-case 7").code, 2);
  EXPECT_EQ(run("hopf").code, 2);                           // --free is required
  EXPECT_EQ(run("hopf --free delta").code, 2);              // not a parameter
  EXPECT_EQ(run("singularities --format svg").code, 2);     // format not offered
  EXPECT_EQ(run("singularities --config /nonexistent.json").code, 2);
  const auto bad = write_file("bad.json", R"({"params": {"alpha1": 1}})");
  EXPECT_EQ(run("singularities --config " + bad.string()).code, 2);
}

TEST(Cli, DomainErrorsExitOne) {
  // alpha2 does not move the trace at O.
  const Outcome r = run("hopf --free alpha2 --alpha0 0.1");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Insensitive"), std::string::npos) << r.err;
  // The gaps keep their sign on this bracket.
  EXPECT_EQ(run("eightloop --alpha0 0.05 --beta 0.05 --lo -0.01 --hi 0").code, 1);
}

TEST(Cli, OutFileAndFormat) {
  const fs::path out = scratch() / "sing.csv";
  const Outcome r = run("singularities --format csv --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const std::string csv = slurp(out);
  EXPECT_EQ(csv.rfind("kind,x,y,trace,det\n", 0), 0u);
  EXPECT_NE(csv.find("saddle,1,0"), std::string::npos);
}

TEST(Cli, CyclesReportsDistribution) {
  const Outcome r = run("cycles --alpha0 0.05 --beta 0.05 --alpha2 -0.065");
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j["distribution"], "(1:0)");
  EXPECT_NEAR(j["cycles_O"][0]["r"].get<double>(), 0.79073697, 1e-6);
}

TEST(Cli, ContinueWritesBranchCsv) {
  const Outcome r = run("continue --alpha0 0.05 --beta 0.05 --alpha2 -0.065 --free gamma --lo -0.001 --hi 0.001");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("param,r,period,multiplier,stability\n", 0), 0u);
  EXPECT_GT(std::count(r.out.begin(), r.out.end(), '\n'), 3);
}

TEST(Cli, SeparatrixCsv) {
  const Outcome r = run("separatrix --alpha0 0.05");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("branch,t,x,y\n", 0), 0u);
  EXPECT_NE(r.out.find("\ns-,"), std::string::npos);
}

TEST(Cli, PortraitSvg) {
  const Outcome r = run("portrait --nx 3 --ny 3 --alpha0 0.05");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("<svg", 0), 0u);
  EXPECT_NE(r.out.find("</svg>"), std::string::npos);
}

TEST(Cli, EightLoopJson) {
  const Outcome r = run("eightloop --alpha0 0.05 --beta 0.05 --lo -0.5 --hi 0");
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_LT(std::abs(j["eight_loop"]["gap_left"].get<double>()), 1e-8);
  EXPECT_LT(j["eight_loop"]["alpha2_left"].get<double>(), 0.0);
}

TEST(Cli, CensusIsByteIdenticalAcrossRuns) {
  const auto cfg = write_file("census.json", R"({
    "params": {"alpha0": 0.05, "beta": 0.05},
    "grid": {"alpha2": {"from": -0.07, "to": -0.06, "n": 3}},
    "census": {"seeds": 30}
  })");
  const Outcome a = run("census --config " + cfg.string());
  const Outcome b = run("census --config " + cfg.string());
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  std::istringstream in(a.out);
  std::string line;
  std::getline(in, line);
  const Json head = Json::parse(line);
  EXPECT_EQ(head["format_version"], "1");
  EXPECT_EQ(head["config"]["census"]["seeds"], 30);
  int n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, 3);
}

TEST(Cli, ScenarioPrefixCompletes) {
  const auto cfg = write_file("scen.json", R"({
    "params": {"alpha0": 0.05},
    "scenario": {"stages": ["centers", "alpha0-foci", "beta-AH"]}
  })");
  const Outcome r = run("scenario --config " + cfg.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_TRUE(j["completed"].get<bool>());
  EXPECT_EQ(j["stages"].size(), 3u);
}

TEST(Cli, ScenarioStageOrderViolation) {
  const auto cfg = write_file("scen_bad.json", R"({"scenario": {"stages": ["centers", "beta-AH"]}})");
  EXPECT_EQ(run("scenario --config " + cfg.string()).code, 1);
}
