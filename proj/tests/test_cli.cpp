#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "afesim_cli_test";

int sh(const std::string& args) {
  const std::string cmd = std::string(AFESIM_CLI) + " " + args + " > " + (kWork / "stdout.txt").string() + " 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
  static void TearDownTestSuite() { fs::remove_all(kWork); }
};

}  // namespace

TEST_F(Cli, DesignFilterIsReproducible) {
  ASSERT_EQ(sh("design-filter --out " + (kWork / "a").string()), 0);
  ASSERT_EQ(sh("design-filter --out " + (kWork / "b").string()), 0);
  const std::string a = slurp(kWork / "a" / "filter.json");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(kWork / "b" / "filter.json"));
  EXPECT_EQ(slurp(kWork / "a" / "filter_response.csv"), slurp(kWork / "b" / "filter_response.csv"));
  const auto j = nlohmann::json::parse(a);
  EXPECT_EQ(j["quantized"]["raw"]["b0"], "3476939323");
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(sh("design-filter --fstop 0.0005 --out " + (kWork / "bad").string()), 2);
  EXPECT_EQ(sh("sweep-wordlength " + (kWork / "nope.json").string()), 2);
  EXPECT_EQ(sh("no-such-command"), 2);
  EXPECT_EQ(sh("run " + (kWork / "missing.json").string()), 2);
  EXPECT_EQ(sh("verify-rdac --corner all --seeds 5"), 0);
  EXPECT_EQ(sh("verify-adc --grid 1024 --random 1000"), 0);
}

TEST_F(Cli, RunWritesReport) {
  std::ofstream(kWork / "tiny.json") << R"({"name": "tiny", "duration_s": 0.2,
    "channels": [{"sources": [{"type": "dc", "offset": 0.001}]}], "residual_window_s": 0.1})";
  ASSERT_EQ(sh("run " + (kWork / "tiny.json").string() + " --out " + (kWork / "run").string()), 0);
  const auto rep = nlohmann::json::parse(slurp(kWork / "run" / "report.json"));
  EXPECT_EQ(rep["scenario"], "tiny");
  EXPECT_EQ(rep["channels"][0]["samples"], 4000);
}

TEST_F(Cli, BudgetReportsPerChannelCurrent) {
  ASSERT_EQ(sh(std::string("budget ") + AFESIM_SCENARIO_DIR + "/budget_typical.json"), 0);
  const std::string out = slurp(kWork / "stdout.txt");
  EXPECT_NE(out.find("4.97"), std::string::npos) << out;
  EXPECT_NE(out.find("7.67"), std::string::npos) << out;
}
