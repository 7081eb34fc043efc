// End-to-end runs of the fovea binary on a 16-scene fixture.
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace {

namespace fs = std::filesystem;

struct CliRun {
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

CliRun run(const std::string& args, const std::string& env = {}) {
  const fs::path err = fs::path(::testing::TempDir()) / "fovea_cli_stderr.txt";
  const std::string cmd = env + (env.empty() ? "" : " ") + FOVEA_CLI_PATH + " " + args + " 2>" + err.string();
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

constexpr const char* kFixture = R"([experiment]
seed = 3

[data]
train_count = 16
val_count = 8
test_count = 8

[ventral]
epochs = 20
batch_size = 16
hidden = 64
lr_milestones =

[m1]
epochs = 20
batch_size = 16
hidden = 32
lr_milestones =

[dorsal]
epochs = 3
batch_size = 8
hidden = 32
lr_milestones =
)";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(::testing::TempDir()) / ("fovea_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    cfg_ = dir_ / "fixture.ini";
    std::ofstream(cfg_) << kFixture;
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string common() const { return "--config " + cfg_.string() + " --out " + (dir_ / "out").string(); }

  fs::path dir_, cfg_;
};

TEST_F(Cli, FullPipelineOnFixture) {
  const auto start = std::chrono::steady_clock::now();
  const std::string c = common();

  ASSERT_EQ(run("generate " + c).code, 0);
  EXPECT_EQ(run("generate " + c).code, 2) << "existing data needs --force";
  ASSERT_EQ(run("generate --force " + c).code, 0);

  const CliRun early = run("train --phase m1 " + c);
  EXPECT_EQ(early.code, 1);
  EXPECT_NE(early.err.find("requires phase ventral"), std::string::npos) << early.err;

  ASSERT_EQ(run("train --phase ventral " + c).code, 0);
  const CliRun again = run("train --phase ventral " + c);
  EXPECT_EQ(again.code, 0);
  EXPECT_NE(again.err.find("up to date"), std::string::npos) << again.err;
  ASSERT_EQ(run("train --phase m1 " + c).code, 0);
  ASSERT_EQ(run("train --phase dorsal " + c).code, 0);

  const CliRun e1 = run("evaluate --split test " + c);
  ASSERT_EQ(e1.code, 0) << e1.err;
  const fs::path out = dir_ / "out";
  const std::string metrics1 = slurp(out / "reports" / "metrics_test.json");
  const std::string traj1 = slurp(out / "reports" / "trajectories_test.jsonl");
  const CliRun e2 = run("evaluate --split test " + c);
  EXPECT_EQ(e1.out, e2.out);
  EXPECT_EQ(slurp(out / "reports" / "metrics_test.json"), metrics1);
  EXPECT_EQ(slurp(out / "reports" / "trajectories_test.jsonl"), traj1);
  const auto metrics = nlohmann::json::parse(metrics1);
  EXPECT_EQ(metrics["n_samples"], 8);

  const CliRun r1 = run("rollout --scene 2 " + c);
  ASSERT_EQ(r1.code, 0) << r1.err;
  EXPECT_EQ(run("rollout --scene 2 " + c).out, r1.out);
  std::size_t overlays = 0;
  for (const auto& e : fs::directory_iterator(out / "rollouts" / "test_2")) overlays += e.path().extension() == ".ppm";
  EXPECT_EQ(overlays, 13u);
  EXPECT_EQ(run("rollout --scene 99 " + c).code, 2);

  // A tampered checkpoint is rejected rather than silently loaded.
  const fs::path ckpt = out / "models" / "dorsal.ckpt";
  std::string bytes = slurp(ckpt);
  bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x5a);
  std::ofstream(ckpt, std::ios::binary) << bytes;
  const CliRun bad = run("evaluate " + c);
  EXPECT_EQ(bad.code, 1);
  EXPECT_FALSE(bad.err.empty());

  // Changing a dorsal setting leaves the earlier phases valid.
  const CliRun changed = run("train --phase m1 --set dorsal.lr=0.01 " + c);
  EXPECT_NE(changed.err.find("up to date"), std::string::npos) << changed.err;

  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 60.0);
}

TEST_F(Cli, ConfigFromEnvironment) {
  const CliRun r = run("generate --out " + (dir_ / "out").string(), "FOVEA_CONFIG=" + cfg_.string());
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "out" / "data" / "train.fds"));
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("dance").code, 2);
  EXPECT_EQ(run("train " + common()).code, 2);
  EXPECT_EQ(run("train --phase warmup " + common()).code, 2);
  EXPECT_EQ(run("evaluate --split holdout " + common()).code, 2);
  EXPECT_EQ(run("generate --config " + (dir_ / "missing.ini").string()).code, 2);
  std::ofstream(cfg_, std::ios::app) << "\n[dorsal]\nbogus = 1\n";
  EXPECT_EQ(run("generate " + common()).code, 2);
}

TEST_F(Cli, EvaluateWithoutModelsIsAMissingPrerequisite) {
  ASSERT_EQ(run("generate " + common()).code, 0);
  const CliRun r = run("evaluate " + common());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("requires phase"), std::string::npos) << r.err;
}

TEST(CliVerify, AllSuitesPassWithJsonSummary) {
  const CliRun r = run("verify");
  EXPECT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_GE(j["suites"].size(), 5u);
  for (const auto& s : j["suites"]) EXPECT_TRUE(s["passed"].get<bool>()) << s["name"];
}

}  // namespace
