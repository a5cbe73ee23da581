#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "cli/cli.hpp"
#include "tokdiff/io.hpp"
#include "tokdiff/oracles.hpp"

using namespace tokdiff;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tokdiff_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    const auto s = PositionalScheduleTable::uniform(linear_schedule(10, 4), 1, 3);
    io::write_text_atomic(path("schedule.json"), io::schedule_to_json(s));
    std::vector<TokenGrid> grids;
    for (const auto& p : oracles::toy_distribution()) grids.push_back(p.grid);
    io::write_text_atomic(path("tokens.json"), io::tokens_to_json(io::make_token_file(grids)));
    io::write_text_atomic(path("bayes.json"),
                          io::bayes_to_json(BayesOracleDenoiser(oracles::toy_distribution(), s)));
    Rng rng(1);
    Matrix features(200, 4);
    for (double& v : features.data()) v = rng.normal();
    io::write_text_atomic(path("features.csv"), io::matrix_to_csv(features));
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string read(const std::string& name) const { return io::read_text(path(name)); }

  fs::path dir_;
};

}  // namespace

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({"--help"}).code, 0);
  const Result none = run({});
  EXPECT_EQ(none.code, 2);
  const Result unknown = run({"frobnicate"});
  EXPECT_EQ(unknown.code, 2);
  EXPECT_EQ(unknown.err.rfind("error:", 0), 0u);
  const Result missing = run({"metrics", "mcd", "--ref", "/nonexistent/a.csv", "--syn", "b.csv"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_EQ(missing.err.rfind("error:", 0), 0u);
  EXPECT_EQ(run({"diffuse", "sample"}).code, 2);
}

TEST(Cli, ScheduleInspectLinear) {
  const Result r = run({"schedule", "inspect", "--kind", "linear", "--T", "100", "--K", "512"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("# kind=linear T=100 K=512"), std::string::npos);
  // Final row: alpha_bar = 0, K * beta_bar = 0.1, gamma_bar = 0.9.
  const auto last = r.out.rfind("\n100 ");
  ASSERT_NE(last, std::string::npos);
  std::istringstream row(r.out.substr(last + 1));
  int t;
  double a, b, g;
  row >> t >> a >> b >> g;
  EXPECT_EQ(t, 100);
  EXPECT_NEAR(a, 0.0, 1e-12);
  EXPECT_NEAR(b, 0.1, 1e-9);
  EXPECT_NEAR(g, 0.9, 1e-9);
}

TEST(Cli, ScheduleInspectImprovedPerLayer) {
  const Result r = run({"schedule", "inspect", "--kind", "improved", "--T", "20", "--K", "16",
                        "--Nq", "3", "--L", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("# layer 0"), std::string::npos);
  EXPECT_NE(r.out.find("# layer 2"), std::string::npos);
  EXPECT_EQ(run({"schedule", "inspect", "--kind", "cosine"}).code, 1);
}

TEST(Cli, TransitionsCheckAndSelftest) {
  const Result check = run({"transitions", "check", "--trials", "5"});
  EXPECT_EQ(check.code, 0) << check.out << check.err;
  const Result self = run({"selftest"});
  EXPECT_EQ(self.code, 0) << self.out;
  EXPECT_NE(self.out.find("selftest passed"), std::string::npos);
}

TEST_F(CliTest, PitchSelfComparisonIsZero) {
  io::write_text_atomic(path("p.csv"), "frame,f0,voiced\n0,100,1\n1,0,0\n2,180,1\n");
  const Result r = run({"metrics", "pitch", "--ref", path("p.csv"), "--syn", path("p.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("gpe=0 vde=0 ffe=0"), std::string::npos) << r.out;
}

TEST_F(CliTest, MetricsAndAuxCommands) {
  io::write_text_atomic(path("sim.csv"), "1,0\n0,1\n");
  Result r = run({"aux", "infonce", "--input", path("sim.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("0.313"), std::string::npos) << r.out;
  r = run({"aux", "recall", "--input", path("sim.csv"), "--k", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("100"), std::string::npos) << r.out;
  EXPECT_EQ(run({"aux", "recall", "--input", path("sim.csv"), "--k", "3"}).code, 1);
  io::write_text_atomic(path("ref.csv"), "3,4\n");
  io::write_text_atomic(path("syn.csv"), "0,0\n");
  r = run({"metrics", "mcd", "--ref", path("ref.csv"), "--syn", path("syn.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("5"), std::string::npos) << r.out;
}

TEST_F(CliTest, CorruptIsSeedDeterministic) {
  for (const char* name : {"a.json", "b.json"}) {
    ASSERT_EQ(run({"diffuse", "corrupt", "--tokens", path("tokens.json"), "--schedule",
                   path("schedule.json"), "--t", "6", "--seed", "11", "--out", path(name)})
                  .code,
              0);
  }
  EXPECT_EQ(read("a.json"), read("b.json"));
  const io::TokenFile f = io::tokens_from_json(read("a.json"));
  EXPECT_EQ(f.grids.size(), oracles::toy_distribution().size());
}

TEST_F(CliTest, SampleIsIndependentOfThreads) {
  std::string first;
  for (const char* threads : {"1", "2", "7"}) {
    const Result r = run({"diffuse", "sample", "--denoiser", path("bayes.json"), "--count", "100",
                          "--seed", "3", "--threads", threads});
    ASSERT_EQ(r.code, 0) << r.err;
    if (first.empty()) first = r.out;
    EXPECT_EQ(r.out, first) << "threads=" << threads;
  }
  const Result other = run({"diffuse", "sample", "--denoiser", path("bayes.json"), "--count",
                            "100", "--seed", "4"});
  EXPECT_NE(other.out, first);
}

TEST_F(CliTest, SampleValidatesArguments) {
  EXPECT_EQ(run({"diffuse", "sample", "--denoiser", path("bayes.json"), "--T", "11"}).code, 1);
  EXPECT_EQ(run({"diffuse", "sample", "--denoiser", path("bayes.json"), "--lambda", "-2"}).code, 1);
  EXPECT_EQ(run({"diffuse", "sample", "--denoiser", path("bayes.json"), "--guidance", "odd"}).code,
            1);
}

TEST_F(CliTest, FailedCommandLeavesNoOutput) {
  io::write_text_atomic(path("bad.json"), "{\"K\": 4");
  const Result r = run({"diffuse", "corrupt", "--tokens", path("bad.json"), "--schedule",
                        path("schedule.json"), "--t", "3", "--out", path("out.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(fs::exists(path("out.json")));
  io::write_text_atomic(path("keep.json"), "previous");
  run({"diffuse", "corrupt", "--tokens", path("tokens.json"), "--schedule", path("schedule.json"),
       "--t", "99", "--out", path("keep.json")});
  EXPECT_EQ(read("keep.json"), "previous");
}

TEST_F(CliTest, TrainThenVlb) {
  const Result train = run({"diffuse", "train", "--tokens", path("tokens.json"), "--schedule",
                            path("schedule.json"), "--epochs", "4", "--seed", "2", "--out",
                            path("model.json")});
  ASSERT_EQ(train.code, 0) << train.err;
  EXPECT_NE(train.out.find("epoch"), std::string::npos);
  const Result vlb = run({"diffuse", "vlb", "--denoiser", path("model.json"), "--tokens",
                          path("tokens.json"), "--samples", "10"});
  ASSERT_EQ(vlb.code, 0) << vlb.err;
  EXPECT_FALSE(vlb.out.empty());
}

TEST_F(CliTest, CodecPipeline) {
  ASSERT_EQ(run({"codec", "fit", "--features", path("features.csv"), "--kind", "grvq", "--G", "2",
                 "--R", "2", "--Kp", "8", "--out", path("codec.json")})
                .code,
            0);
  const CodecModel m = io::codec_from_json(read("codec.json"));
  EXPECT_EQ(m.n_books(), 4);
  ASSERT_EQ(run({"codec", "encode", "--codec", path("codec.json"), "--features",
                 path("features.csv"), "--out", path("tok.json")})
                .code,
            0);
  ASSERT_EQ(run({"codec", "decode", "--codec", path("codec.json"), "--tokens", path("tok.json"),
                 "--out", path("rec.csv")})
                .code,
            0);
  const Matrix x = io::matrix_from_csv(read("features.csv"));
  const Matrix rec = io::matrix_from_csv(read("rec.csv"));
  EXPECT_EQ(quantize(x, m).reconstruction.rows(), rec.rows());
  EXPECT_LT(mean_squared_error(x, rec), 1.0);
  const Result report = run({"codec", "report", "--codec", path("codec.json"), "--features",
                             path("features.csv")});
  ASSERT_EQ(report.code, 0) << report.err;
  EXPECT_FALSE(report.out.empty());
  EXPECT_EQ(run({"codec", "encode", "--codec", path("codec.json"), "--features",
                 path("features.csv"), "--active", "1"})
                .code,
            0);
}
