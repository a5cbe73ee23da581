#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tokdiff/errors.hpp"
#include "tokdiff/io.hpp"
#include "tokdiff/oracles.hpp"

using namespace tokdiff;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tokdiff_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void expect_same_schedule(const PositionalScheduleTable& a, const PositionalScheduleTable& b) {
  EXPECT_EQ(a.kind, b.kind);
  EXPECT_EQ(a.T, b.T);
  EXPECT_EQ(a.K, b.K);
  EXPECT_EQ(a.n_q, b.n_q);
  EXPECT_EQ(a.frames, b.frames);
  EXPECT_EQ(a.layout, b.layout);
  ASSERT_EQ(a.layers.size(), b.layers.size());
  for (std::size_t q = 0; q < a.layers.size(); ++q) {
    EXPECT_EQ(a.layers[q].alpha_bar, b.layers[q].alpha_bar);
    EXPECT_EQ(a.layers[q].gamma_bar, b.layers[q].gamma_bar);
    EXPECT_EQ(a.layers[q].alpha, b.layers[q].alpha);
  }
}

}  // namespace

TEST(IoSchedule, RoundTrips) {
  const auto linear = PositionalScheduleTable::uniform(linear_schedule(20, 7), 2, 5);
  expect_same_schedule(io::schedule_from_json(io::schedule_to_json(linear)), linear);
  const auto improved = improved_schedule(30, 16, 4, Layout::interleaved, 3);
  expect_same_schedule(io::schedule_from_json(io::schedule_to_json(improved)), improved);
}

TEST(IoSchedule, RebuildsFromParameters) {
  const auto s = io::schedule_from_json(
      R"({"kind": "improved", "T": 10, "K": 8, "N_q": 2, "layout": "concatenated", "L": 4})");
  expect_same_schedule(s, improved_schedule(10, 8, 2, Layout::concatenated, 4));
}

TEST(IoSchedule, RejectsMalformedInput) {
  EXPECT_THROW(io::schedule_from_json("{not json"), io::FormatError);
  EXPECT_THROW(io::schedule_from_json(R"({"kind": "linear", "K": 4})"), io::FormatError);
  EXPECT_THROW(io::schedule_from_json(R"({"kind": "custom", "T": 2, "K": 4})"), io::FormatError);
}

TEST(IoTokens, RoundTripsWithLabels) {
  TokenGrid a(5, 2, 3);
  a.tokens = {0, 1, 2, 3, 4, 0};
  TokenGrid b(5, 2, 3);
  b.tokens = {4, 4, 1, 0, 2, 3};
  io::TokenFile file = io::make_token_file({a, b});
  file.grids[1].cond = Condition::of(3);
  const io::TokenFile back = io::tokens_from_json(io::tokens_to_json(file));
  EXPECT_EQ(back.K, 5);
  EXPECT_EQ(back.n_q, 2);
  EXPECT_EQ(back.frames, 3);
  ASSERT_EQ(back.grids.size(), 2u);
  EXPECT_EQ(back.grids[0].grid, a);
  EXPECT_EQ(back.grids[1].grid, b);
  EXPECT_TRUE(back.grids[0].cond.is_null());
  EXPECT_EQ(back.grids[1].cond, Condition::of(3));
}

TEST(IoTokens, RejectsMalformedGrids) {
  EXPECT_THROW(io::tokens_from_json(R"({"K": 4, "N_q": 1, "L": 2, "grids": [[[0]]]})"),
               io::FormatError);
  EXPECT_THROW(io::tokens_from_json(R"({"K": 4, "N_q": 1, "L": 1, "grids": [[[0.5]]]})"),
               io::FormatError);
  EXPECT_THROW(io::tokens_from_json(R"({"K": 4, "N_q": 1, "L": 1})"), io::FormatError);
}

TEST(IoDenoiser, TabularRoundTrip) {
  const auto s = PositionalScheduleTable::uniform(linear_schedule(4, 3), 1, 2);
  TabularDenoiser model(4, 3, 2, {1, 2});
  Rng rng(1);
  for (double& v : model.table()) v = rng.normal();
  const io::DenoiserFile back = io::denoiser_from_json(io::tabular_to_json(model, s));
  TokenGrid x(3, 1, 2);
  x.tokens = {3, 1};
  for (int t = 1; t <= 4; ++t) {
    for (const Condition& c : {Condition::null(), Condition::of(2)}) {
      EXPECT_EQ(back.denoiser->predict(x, t, c), model.predict(x, t, c));
    }
  }
  expect_same_schedule(back.schedule, s);
}

TEST(IoDenoiser, BayesRoundTrip) {
  const auto s = PositionalScheduleTable::uniform(linear_schedule(5, 4), 1, 3);
  const BayesOracleDenoiser model(oracles::toy_distribution(), s);
  const io::DenoiserFile back = io::denoiser_from_json(io::bayes_to_json(model));
  TokenGrid x(4, 1, 3);
  x.tokens = {4, 1, 4};
  const Matrix got = back.denoiser->predict(x, 3, {});
  const Matrix want = model.predict(x, 3, {});
  ASSERT_EQ(got.rows(), want.rows());
  // Support probabilities are renormalized on load.
  for (std::size_t i = 0; i < got.data().size(); ++i) EXPECT_NEAR(got.data()[i], want.data()[i], 1e-15);
}

TEST(IoDenoiser, RejectsUnknownKind) {
  EXPECT_THROW(io::denoiser_from_json(R"({"kind": "mlp", "schedule": {}})"), io::FormatError);
}

TEST(IoCodec, RoundTrip) {
  const CodecModel m = random_codec(codec_preset("grvq"), 16, 3);
  const CodecModel back = io::codec_from_json(io::codec_to_json(m));
  EXPECT_EQ(back.kind, m.kind);
  EXPECT_EQ(back.groups, m.groups);
  EXPECT_EQ(back.depth, m.depth);
  EXPECT_EQ(back.codes, m.codes);
  EXPECT_EQ(back.dim, m.dim);
  EXPECT_EQ(back.codebooks, m.codebooks);
}

TEST(IoCsv, MatrixRoundTripAndHeader) {
  const Matrix m(2, 3, std::vector<double>{1.5, -2, 3e-7, 0.1, 1e10, -0.0});
  EXPECT_EQ(io::matrix_from_csv(io::matrix_to_csv(m)), m);
  EXPECT_EQ(io::matrix_from_csv("a,b\n1,2\n3,4\n"), Matrix(2, 2, std::vector<double>{1, 2, 3, 4}));
  EXPECT_THROW(io::matrix_from_csv("1,2\n3\n"), io::FormatError);
  EXPECT_THROW(io::matrix_from_csv("1,2\n3,x\n"), io::FormatError);
  EXPECT_THROW(io::matrix_from_csv("a,b\n"), io::FormatError);
}

TEST(IoCsv, PitchTrack) {
  const PitchTrack t = io::pitch_from_csv("frame,f0,voiced\n0,100,1\n1,0,0\n2,210.5,1\n");
  EXPECT_EQ(t.f0, (std::vector<double>{100, 0, 210.5}));
  EXPECT_EQ(t.voiced, (std::vector<bool>{true, false, true}));
  EXPECT_THROW(io::pitch_from_csv("frame,f0,voiced\n"), io::FormatError);
}

TEST(IoFiles, AtomicWriteReplacesContent) {
  const fs::path dir = scratch_dir("replace");
  const std::string path = (dir / "out.json").string();
  io::write_text_atomic(path, "first");
  io::write_text_atomic(path, "second");
  EXPECT_EQ(io::read_text(path), "second");
  EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}), 1);
}

TEST(IoFiles, FailedWriteLeavesNothingBehind) {
  const fs::path dir = scratch_dir("fail");
  EXPECT_THROW(io::write_text_atomic((dir / "missing" / "out.json").string(), "x"), Error);
  // The target is a directory, so the final rename fails.
  fs::create_directories(dir / "taken");
  fs::create_directories(dir / "taken" / "child");
  EXPECT_THROW(io::write_text_atomic((dir / "taken").string(), "x"), Error);
  EXPECT_TRUE(fs::is_directory(dir / "taken"));
  EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}), 1);
  EXPECT_THROW(io::read_text((dir / "absent").string()), Error);
}
