// Copyright 2026 The uqshift Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "uqshift/harness.h"

namespace uqshift {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "uqshift");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("uqshift_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string Path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

TEST_F(CliTest, HelpAndUsageErrors) {
  const CliResult help = Cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("score-logits"), std::string::npos);
  EXPECT_EQ(Cli({}).code, 1);
  EXPECT_EQ(Cli({"frobnicate"}).code, 1);
  EXPECT_EQ(Cli({"run", "--bogus"}).code, 1);
  const CliResult missing = Cli({"score-logits", Path("nope.jsonl"), "--classes", "2"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_FALSE(missing.err.empty());
}

TEST_F(CliTest, ScoreLogits) {
  std::ofstream(Path("preds.jsonl")) << R"({"logits":[2,0],"label":0}
{"logits":[0,3],"label":1}
{"probs":[0.4,0.6],"label":0}
{"logits":[-1,1],"label":1}
)";
  const CliResult r = Cli({"score-logits", Path("preds.jsonl"), "--classes", "2"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("accuracy 0.7500"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("auroc 1.0000"), std::string::npos) << r.out;
  std::ofstream(Path("bad.jsonl")) << R"({"logits":[1,2,3],"label":0})";
  EXPECT_EQ(Cli({"score-logits", Path("bad.jsonl"), "--classes", "2"}).code, 2);
}

TEST_F(CliTest, ConfigErrorsAreRuntimeFailures) {
  std::ofstream(Path("bad.cfg")) << "config_version = 1\nnope = 3\n";
  const CliResult r = Cli({"--config", Path("bad.cfg"), "--out", Path("o"), "gen"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unknown key"), std::string::npos);
}

TEST_F(CliTest, GenTrainEvalReport) {
  std::ofstream(Path("small.cfg")) << "config_version = 1\n"
                                      "baseline.epochs = 5\n"
                                      "fsl.train_episodes = 20\n"
                                      "fsl.val_every = 10\n";
  const std::string out = Path("run");
  const std::vector<std::string> common = {"--config", Path("small.cfg"), "--out", out};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = common;
    a.insert(a.end(), extra.begin(), extra.end());
    return Cli(a);
  };
  EXPECT_EQ(with({"gen"}).code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "run" / "datasets" / "ood_scc.jsonl"));

  CliResult r = with({"train", "baseline"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "run" / "models" / "baseline.mlp"));
  EXPECT_EQ(with({"train", "svm"}).code, 2);

  r = with({"eval", "baseline", "--dataset", "in_test"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("baseline on in_test"), std::string::npos);

  r = with({"eval", "baseline", "--dataset",
            (dir_ / "run" / "datasets" / "ood_cxr.jsonl").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ood_cxr"), std::string::npos);

  r = with({"eval", "fsl", "--dataset", "in_test"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("not evaluated on in_test"), std::string::npos) << r.err;

  EXPECT_EQ(with({"eval", "mc_dropout", "--dataset", "ood_scc"}).code, 2);
  EXPECT_EQ(with({"eval", "baseline", "--dataset", "nowhere"}).code, 2);
}

TEST_F(CliTest, RunThenReport) {
  const std::string out = Path("full");
  CliResult r = Cli({"--out", out, "--seed", "3", "run"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "full" / "report.jsonl"));
  EXPECT_NE(r.out.find("Acc"), std::string::npos);

  r = Cli({"report", "--run", out, "--style", "table4"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Entropy"), std::string::npos);
  EXPECT_NE(r.out.find("ood_cxr"), std::string::npos);

  r = Cli({"report", "--run", out, "--style", "table5", "--output", Path("t5.txt")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "t5.txt"));
  EXPECT_TRUE(fs::exists(dir_ / "t5.txt.jsonl"));

  EXPECT_EQ(Cli({"report", "--run", out, "--style", "table7"}).code, 2);
  EXPECT_EQ(Cli({"report", "--run", Path("absent"), "--style", "table2"}).code, 2);
  EXPECT_EQ(LoadConfig(dir_ / "full" / "config.cfg").master_seed, 3u);
}

}  // namespace
}  // namespace uqshift
