#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(REPINFO_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("repinfo_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Cli, HelpExitsZero) { EXPECT_EQ(run_cli("--help"), 0); }

TEST(Cli, UnknownSubcommandIsConfigError) { EXPECT_EQ(run_cli("frobnicate"), 1); }

TEST(Cli, MissingConfigFileExitsOne) {
  EXPECT_EQ(run_cli("experiment --config /nonexistent/plan.json --out " + scratch("missing").string()), 1);
}

TEST(Cli, UnknownKeyExitsOne) {
  const fs::path d = scratch("badkey");
  std::ofstream(d / "plan.json") << R"({"preset": "smallfc_n2", "training": {"learning_rt": 0.1}})";
  EXPECT_EQ(run_cli("experiment --config " + (d / "plan.json").string() + " --out " + d.string()), 1);
}

TEST(Cli, GradcheckPasses) { EXPECT_EQ(run_cli("gradcheck"), 0); }

TEST(Cli, ReportOnMissingRunIsIoError) {
  EXPECT_EQ(run_cli("report --run " + (scratch("norun") / "absent").string()), 3);
}

TEST(Cli, GenerateWritesCsv) {
  const fs::path d = scratch("gen");
  const fs::path file = d / "cb.csv";
  ASSERT_EQ(run_cli("generate --n 3 --samples 20 --file " + file.string()), 0);
  std::ifstream in(file);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("sample_id,direction,color,coarse,x_0", 0), 0u);
}

TEST(Cli, TinyExperimentThenReport) {
  const fs::path d = scratch("exp");
  std::ofstream(d / "plan.json") << R"({
    "preset": "smallfc_n2",
    "task": {"num_samples": 300},
    "training": {"epochs": 2},
    "probe": {"epochs": 1, "train_samples": 100, "test_samples": 100, "hidden": [8]},
    "schedule": "final",
    "seeds": [0]
  })";
  ASSERT_EQ(run_cli("experiment --config " + (d / "plan.json").string() + " --out " + d.string()), 0);
  fs::path run;
  for (const auto& e : fs::directory_iterator(d)) {
    if (e.is_directory() && e.path().filename().string().rfind("run_", 0) == 0) run = e.path();
  }
  ASSERT_FALSE(run.empty());
  EXPECT_TRUE(fs::exists(run / "info.csv"));
  EXPECT_TRUE(fs::exists(run / "metrics.csv"));
  EXPECT_EQ(run_cli("report --run " + run.string() + " --format csv"), 0);
  EXPECT_EQ(run_cli("report --run " + run.string() + " --format pdf"), 1);
}
