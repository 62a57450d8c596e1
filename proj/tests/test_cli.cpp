#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli.hpp"

namespace canonnet {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / (std::string("canonnet_cli_") + info->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  fs::path dir(const std::string& name) {
    const fs::path p = root_ / name;
    fs::create_directories(p);
    return p;
  }

  static int run(std::vector<std::string> args) {
    args.insert(args.begin(), "canonnet");
    return cli::run(args);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
  }

  static void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

  fs::path generate(const std::string& name, int per_class, const std::string& seed = "7") {
    const fs::path out = dir(name);
    EXPECT_EQ(run({"generate", "--out", out.string(), "--seed", seed, "--samples-per-class",
                   std::to_string(per_class), "--noise", "0,0.01"}),
              0);
    return out;
  }

  fs::path root_;
};

void expect_same_files(const fs::path& a, const fs::path& b) {
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const fs::path other = b / entry.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    std::ifstream fa(entry.path(), std::ios::binary), fb(other, std::ios::binary);
    std::ostringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    EXPECT_EQ(sa.str(), sb.str()) << entry.path().filename();
    ++n;
  }
  EXPECT_GT(n, 0u);
}

TEST_F(CliTest, GenerateIsReproducible) {
  const fs::path a = generate("a", 100);
  const fs::path b = generate("b", 100);
  expect_same_files(a, b);
  const json m = json::parse(slurp(a / "manifest.json"));
  EXPECT_EQ(m["records"], 400);
  for (const auto& [name, count] : m["class_counts"].items()) EXPECT_EQ(count, 100) << name;
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({"generate", "--out", (root_ / "missing").string()}), cli::kExitData);
  EXPECT_EQ(run({"generate", "--out", dir("x").string(), "--bogus", "1"}), cli::kExitConfig);
  EXPECT_EQ(run({"generate", "--out", dir("x").string(), "--noise", "0,abc"}), cli::kExitConfig);
  EXPECT_EQ(run({"generate", "--out", dir("x").string(), "--seed", "minus"}), cli::kExitConfig);
  EXPECT_EQ(run({"--config", (root_ / "nope.ini").string(), "generate", "--out", dir("x").string()}),
            cli::kExitConfig);
  EXPECT_EQ(run({}), cli::kExitConfig);
  EXPECT_EQ(run({"train", "--out", dir("x").string(), "--data", (root_ / "none.cnn").string()}),
            cli::kExitData);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::Diverged), cli::kExitNumerical);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::DegenerateSpectrum), cli::kExitNumerical);
}

TEST_F(CliTest, ConfigFileAndFlagOverride) {
  write(root_ / "run.ini", "[generate]\nseed=11\nsamples-per-class=5\n[train]\nepochs=1\n");
  const fs::path a = dir("a");
  ASSERT_EQ(run({"--config", (root_ / "run.ini").string(), "generate", "--out", a.string()}), 0);
  EXPECT_EQ(json::parse(slurp(a / "manifest.json"))["records"], 20);
  const fs::path b = dir("b");
  ASSERT_EQ(run({"--config", (root_ / "run.ini").string(), "generate", "--out", b.string(),
                 "--samples-per-class", "3"}),
            0);
  const json mb = json::parse(slurp(b / "manifest.json"));
  EXPECT_EQ(mb["records"], 12);
  EXPECT_EQ(mb["seed"], 11);

  // The resolved config reproduces the run.
  const fs::path c = dir("c");
  ASSERT_EQ(run({"--config", (a / "config.ini").string(), "generate", "--out", c.string()}), 0);
  expect_same_files(a, c);
}

TEST_F(CliTest, TrainSmokeAndResume) {
  const fs::path data = generate("data", 50);
  const fs::path a = dir("a");
  const auto t0 = std::chrono::steady_clock::now();
  ASSERT_EQ(run({"train", "--data", (data / "dataset.cnn").string(), "--out", a.string(), "--epochs",
                 "2", "--seed", "3"}),
            0);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 60.0);
  const fs::path b = dir("b");
  ASSERT_EQ(run({"train", "--data", (data / "dataset.cnn").string(), "--out", b.string(), "--epochs",
                 "2", "--seed", "3"}),
            0);
  expect_same_files(a, b);

  const fs::path whole = dir("whole");
  ASSERT_EQ(run({"train", "--data", (data / "dataset.cnn").string(), "--out", whole.string(),
                 "--epochs", "4", "--seed", "3"}),
            0);
  const fs::path resumed = dir("resumed");
  ASSERT_EQ(run({"train", "--data", (data / "dataset.cnn").string(), "--out", resumed.string(),
                 "--epochs", "2", "--seed", "3", "--resume", (a / "model.cnm").string()}),
            0);
  EXPECT_EQ(slurp(resumed / "model.cnm"), slurp(whole / "model.cnm"));
  const std::string tail = slurp(whole / "loss.csv");
  const std::string head = slurp(a / "loss.csv");
  EXPECT_EQ(head + slurp(resumed / "loss.csv").substr(std::string("epoch,loss\n").size()), tail);
}

TEST_F(CliTest, EvalReport) {
  const fs::path data = generate("data", 30);
  const fs::path m = dir("m");
  ASSERT_EQ(run({"train", "--data", (data / "dataset.cnn").string(), "--out", m.string(), "--epochs", "3"}), 0);
  const fs::path e = dir("e");
  ASSERT_EQ(run({"eval", "--model", (m / "model.cnm").string(), "--data", (data / "dataset.cnn").string(),
                 "--out", e.string()}),
            0);
  const json r = json::parse(slurp(e / "report.json"));
  for (const char* key : {"accuracy", "d_k_rmse", "d_h_rmse", "confusion", "samples"}) {
    EXPECT_TRUE(r.contains(key)) << key;
  }
  EXPECT_EQ(r["confusion"].size(), 4u);
  EXPECT_NE(slurp(e / "report.csv").find("d_h_rmse,"), std::string::npos);

  const fs::path other = dir("other");
  ASSERT_EQ(run({"generate", "--out", other.string(), "--samples-per-class", "2", "--patch-size", "25"}), 0);
  EXPECT_EQ(run({"eval", "--model", (m / "model.cnm").string(), "--data", (other / "dataset.cnn").string(),
                 "--out", e.string()}),
            cli::kExitData);
}

TEST_F(CliTest, Canon) {
  std::ostringstream pts, shuffled;
  std::vector<std::string> lines;
  for (int i = 0; i < 20; ++i) {
    const double x = 0.05 * i - 0.5 + 0.013 * (i % 3);
    const double y = std::sin(1.7 * i) * 0.5;
    std::ostringstream l;
    l.precision(17);
    l << x << ' ' << y << ' ' << 0.4 * x * x - 0.3 * y * y + 0.1 * x * y;
    lines.push_back(l.str());
  }
  for (const auto& l : lines) pts << l << '\n';
  for (std::size_t i = 0; i < lines.size(); ++i) shuffled << lines[(i * 7) % lines.size()] << '\n';
  write(root_ / "pts.txt", "# patch\n" + pts.str());
  write(root_ / "shuffled.txt", shuffled.str());

  const fs::path a = dir("a"), b = dir("b"), c = dir("c");
  ASSERT_EQ(run({"canon", "--input", (root_ / "pts.txt").string(), "--out", a.string()}), 0);
  ASSERT_EQ(run({"canon", "--input", (a / "canonical.txt").string(), "--out", b.string()}), 0);
  ASSERT_EQ(run({"canon", "--input", (root_ / "shuffled.txt").string(), "--out", c.string()}), 0);
  const json ja = json::parse(slurp(a / "canon.json"));
  const json jb = json::parse(slurp(b / "canon.json"));
  const json jc = json::parse(slurp(c / "canon.json"));
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_NEAR(jb["canonical_points"][i][k].get<double>(), ja["canonical_points"][i][k].get<double>(), 1e-9);
      EXPECT_NEAR(jc["canonical_points"][i][k].get<double>(), ja["canonical_points"][i][k].get<double>(), 1e-9);
    }
  }

  write(root_ / "triangle.txt", "0 0 0\n1 0 0\n0.5 0.86602540378443865 0\n");
  const fs::path d = dir("d");
  EXPECT_EQ(run({"canon", "--input", (root_ / "triangle.txt").string(), "--out", d.string()}),
            cli::kExitNumerical);
  EXPECT_EQ(json::parse(slurp(d / "canon.json"))["error"], "DegenerateSpectrum");

  write(root_ / "bad.txt", "0 0 0\n1 x 0\n");
  EXPECT_EQ(run({"canon", "--input", (root_ / "bad.txt").string(), "--out", d.string()}), cli::kExitData);
}

TEST_F(CliTest, DescriptorAndAblate) {
  const fs::path data = generate("data", 10);
  const fs::path m = dir("m");
  ASSERT_EQ(run({"train", "--data", (data / "dataset.cnn").string(), "--out", m.string(), "--epochs", "1"}), 0);
  std::ostringstream pts;
  pts.precision(17);
  for (int i = 0; i < 120; ++i) {
    const double x = std::sin(0.37 * i) * 0.5, y = std::cos(1.13 * i) * 0.5;
    pts << x << ' ' << y << ' ' << x * y << '\n';
  }
  write(root_ / "cloud.txt", pts.str());
  const fs::path d = dir("d");
  ASSERT_EQ(run({"descriptor", "--model", (m / "model.cnm").string(), "--input", (root_ / "cloud.txt").string(),
                 "--out", d.string()}),
            0);
  EXPECT_EQ(json::parse(slurp(d / "descriptor.json"))["values"].size(), 18u);

  const fs::path a1 = dir("a1"), a2 = dir("a2");
  const std::vector<std::string> common{"ablate", "--kind", "ordering", "--patches", "12", "--seed", "5"};
  auto with = [&](const fs::path& out, const std::string& threads) {
    auto args = common;
    args.insert(args.end(), {"--out", out.string(), "--threads", threads});
    return run(args);
  };
  ASSERT_EQ(with(a1, "1"), 0);
  ASSERT_EQ(with(a2, "3"), 0);
  expect_same_files(a1, a2);
  EXPECT_EQ(run({"ablate", "--kind", "nope", "--out", a1.string()}), cli::kExitConfig);
}

}  // namespace
}  // namespace canonnet
