#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"

using diffpool::cli::run_cli;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Path printed on the "output: " line.
fs::path output_dir(const std::string& stdout_text) {
  const auto pos = stdout_text.find("output: ");
  const auto end = stdout_text.find('\n', pos);
  return stdout_text.substr(pos + 8, end - pos - 8);
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("diffpool_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }
  std::string path(const std::string& leaf) const { return (root_ / leaf).string(); }

  // Small multispeaker dataset plus a trained Lp model.
  std::string small_setup() {
    const std::string cfg = path("small.json");
    std::ofstream(cfg) << R"({"data":{"multispeaker":{"n_per_speaker":200,"n_speakers_train":3,
      "n_speakers_test":2}},"model":{"hidden":[10,10]},"train":{"max_epochs":3}})";
    EXPECT_EQ(cli({"gen-data", "--task", "multispeaker", "--out", path("ms"), "--config", cfg}).code, 0);
    const auto tr = cli({"train", "--data", path("ms"), "--out", path("runs"), "--config", cfg});
    EXPECT_EQ(tr.code, 0) << tr.err;
    return (output_dir(tr.out) / "model.json").string();
  }

  fs::path root_;
};

}  // namespace

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(cli({"--help"}).code, 0);
  EXPECT_EQ(cli({"train", "--help"}).code, 0);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"gradcheck", "--op", "lp", "--trials", "many"}).code, 2);
  EXPECT_EQ(cli({"gen-data", "--task", "spiral", "--out", path("x")}).code, 2);
}

TEST_F(Cli, GenDataRefusesNonEmptyDirectory) {
  EXPECT_EQ(cli({"gen-data", "--task", "closed-region", "--out", path("d"), "--n-per-class", "20"}).code, 0);
  const std::string first = slurp(path("d/data.csv"));
  EXPECT_EQ(cli({"gen-data", "--task", "closed-region", "--out", path("d"), "--seed", "5"}).code, 2);
  EXPECT_EQ(slurp(path("d/data.csv")), first);
  EXPECT_EQ(cli({"gen-data", "--task", "closed-region", "--out", path("d"), "--n-per-class", "20",
                 "--force"})
                .code,
            0);
  EXPECT_EQ(slurp(path("d/data.csv")), first);
  EXPECT_TRUE(fs::exists(path("d/manifest.json")));
  EXPECT_TRUE(fs::exists(path("d/resolved_config.json")));
}

TEST_F(Cli, ConfigValidation) {
  std::ofstream(path("bad.json")) << R"({"train":{"learning_rate":0.1}})";
  const auto r = cli({"gen-data", "--task", "closed-region", "--out", path("d"), "--config", path("bad.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("train.learning_rate"), std::string::npos) << r.err;
  std::ofstream(path("broken.json")) << "{";
  EXPECT_EQ(cli({"gen-data", "--task", "closed-region", "--out", path("d"), "--config", path("broken.json")}).code,
            2);
}

TEST_F(Cli, GradcheckExitCodes) {
  const auto r = cli({"gradcheck", "--op", "lhuc", "--trials", "20"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("max_rel_error r "), std::string::npos);
  EXPECT_EQ(cli({"gradcheck", "--op", "conv"}).code, 2);
}

TEST_F(Cli, TrainIsDeterministicAndContentAddressed) {
  ASSERT_EQ(cli({"gen-data", "--task", "closed-region", "--out", path("d"), "--n-per-class", "60"}).code, 0);
  const std::vector<std::string> args{"train", "--data", path("d"), "--out", path("runs"), "--model", "lp",
                                      "--hidden", "2", "--pool-size", "2", "--epochs", "3"};
  const auto a = cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  const fs::path dir = output_dir(a.out);
  const std::string model = slurp(dir / "model.json");
  const std::string report = slurp(dir / "train_report.csv");
  const auto b = cli(args);
  EXPECT_EQ(output_dir(b.out), dir);
  EXPECT_EQ(slurp(dir / "model.json"), model);
  EXPECT_EQ(slurp(dir / "train_report.csv"), report);
  auto other = args;
  other.insert(other.end(), {"--seed", "2"});
  EXPECT_NE(output_dir(cli(other).out), dir);
  for (const char* f : {"resolved_config.json", "train_summary.json"}) EXPECT_TRUE(fs::exists(dir / f));
}

TEST_F(Cli, AdaptAndInspect) {
  const std::string model = small_setup();
  const auto a = cli({"adapt", "--model", model, "--data", path("ms"), "--out", path("adapt"), "--subset",
                      "rho,lhuc", "--sweep", "50,all", "--repeats", "2"});
  ASSERT_EQ(a.code, 0) << a.err;
  const fs::path dir = output_dir(a.out);
  for (const char* f : {"adapt_report.csv", "adapt_summary.json", "histogram_p.csv", "resolved_config.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const fs::path adapted = dir / "models" / "speaker_3.json";
  ASSERT_TRUE(fs::exists(adapted));

  const auto i = cli({"inspect", "--model", model, "--model-after", adapted.string(), "--out", path("insp")});
  ASSERT_EQ(i.code, 0) << i.err;
  EXPECT_TRUE(fs::exists(output_dir(i.out) / "histogram_p.csv"));
  EXPECT_TRUE(fs::exists(output_dir(i.out) / "inspect_summary.json"));
}

TEST_F(Cli, AdaptSubsetMismatchIsUsageError) {
  const std::string model = small_setup();
  const auto r = cli({"adapt", "--model", model, "--data", path("ms"), "--out", path("adapt"), "--subset", "mu"});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(path("adapt")));
}

TEST_F(Cli, InspectArchitectureMismatch) {
  const std::string model = small_setup();
  ASSERT_EQ(cli({"gen-data", "--task", "closed-region", "--out", path("cr"), "--n-per-class", "30"}).code, 0);
  const auto t = cli({"train", "--data", path("cr"), "--out", path("runs2"), "--hidden", "4", "--pool-size", "2",
                      "--epochs", "1"});
  ASSERT_EQ(t.code, 0) << t.err;
  const auto r = cli({"inspect", "--model", model, "--model-after", (output_dir(t.out) / "model.json").string(),
                      "--out", path("insp")});
  EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, MissingInputsFail) {
  EXPECT_EQ(cli({"train", "--data", path("nowhere"), "--out", path("r")}).code, 2);
  EXPECT_EQ(cli({"inspect", "--model", path("none.json"), "--out", path("r")}).code, 2);
}
