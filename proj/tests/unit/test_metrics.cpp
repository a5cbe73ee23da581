#include <gtest/gtest.h>

#include <cmath>

#include "tokdiff/errors.hpp"
#include "tokdiff/metrics.hpp"
#include "tokdiff/random.hpp"

using namespace tokdiff;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

PitchTrack random_track(std::size_t n, Rng& rng) {
  PitchTrack t;
  for (std::size_t i = 0; i < n; ++i) {
    const bool v = rng.uniform() < 0.6;
    t.voiced.push_back(v);
    t.f0.push_back(v ? 80.0 + 200.0 * rng.uniform() : 0.0);
  }
  return t;
}

}  // namespace

TEST(Mcd, HandCase) {
  const Matrix ref(1, 2, std::vector<double>{3.0, 4.0});
  const Matrix syn(1, 2, 0.0);
  EXPECT_DOUBLE_EQ(mcd(ref, syn), 5.0);
  EXPECT_EQ(McdOptions{}.order, 24);
}

TEST(Mcd, IdentitySymmetryAndOrder) {
  const Matrix a = random_matrix(20, 30, 1);
  const Matrix b = random_matrix(20, 30, 2);
  EXPECT_EQ(mcd(a, a), 0.0);
  EXPECT_DOUBLE_EQ(mcd(a, b), mcd(b, a));
  // Only the first 24 coefficients count.
  Matrix c = a;
  for (std::size_t t = 0; t < 20; ++t) c(t, 27) += 5.0;
  EXPECT_EQ(mcd(a, c), 0.0);
  McdOptions all;
  all.order = 30;
  EXPECT_NEAR(mcd(a, c, all), 5.0, 1e-12);
}

TEST(Mcd, DbScaling) {
  const Matrix ref(1, 2, std::vector<double>{3.0, 4.0});
  McdOptions db;
  db.db_scale = true;
  EXPECT_NEAR(mcd(ref, Matrix(1, 2, 0.0), db), 5.0 * 10.0 * std::sqrt(2.0) / std::log(10.0), 1e-12);
}

TEST(Mcd, ShapeMismatch) {
  EXPECT_THROW(mcd(Matrix(2, 3), Matrix(3, 3)), ArgumentError);
}

TEST(Ssim, SelfSimilarityIsOne) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix x = random_matrix(16, 20, seed);
    EXPECT_NEAR(ssim(x, x), 1.0, 1e-9);
  }
  EXPECT_NEAR(ssim(Matrix(8, 8, 3.0), Matrix(8, 8, 3.0)), 1.0, 1e-12);
}

TEST(Ssim, ConstantShiftOneByOneWindow) {
  const double a = 2.0;
  const double d = 0.5;
  SsimOptions o;
  o.window = 1;
  o.c1 = 0.01;
  o.c2 = 0.03;
  const double expected = (2 * a * (a + d) + 0.01) / (a * a + (a + d) * (a + d) + 0.01);
  EXPECT_NEAR(ssim(Matrix(3, 3, a), Matrix(3, 3, a + d), o), expected, 1e-12);
}

TEST(Ssim, AntiCorrelatedIsNegative) {
  Matrix a(7, 7);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 7; ++j) a(i, j) = ((i + j) % 2 == 0) ? 1.0 : -1.0;
  }
  // Shared positive mean keeps the luminance term near 1.
  Matrix b = a;
  for (double& v : b.data()) v = 5.0 - v;
  for (double& v : a.data()) v += 5.0;
  EXPECT_LT(ssim(a, b), 0.0);
}

TEST(Ssim, BoundedAndSymmetricWithFixedConstants) {
  SsimOptions o;
  o.c1 = 1e-4;
  o.c2 = 9e-4;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix a = random_matrix(12, 12, 100 + seed);
    const Matrix b = random_matrix(12, 12, 200 + seed);
    const double s = ssim(a, b, o);
    EXPECT_LE(std::abs(s), 1.0);
    EXPECT_NEAR(s, ssim(b, a, o), 1e-12);
  }
}

TEST(Ssim, RejectsBadWindow) {
  EXPECT_THROW(ssim(Matrix(5, 5), Matrix(5, 5), {}), ArgumentError);
  EXPECT_THROW(ssim(Matrix(8, 8), Matrix(8, 7), {}), ArgumentError);
}

TEST(Pitch, FourFrameExample) {
  const PitchTrack ref{{100, 150, 0, 200}, {true, true, false, true}};
  const PitchTrack syn{{130, 0, 0, 202}, {true, false, false, true}};
  const PitchErrors e = pitch_errors(ref, syn);
  EXPECT_EQ(e.vde, 0.25);
  ASSERT_TRUE(e.gpe.has_value());
  EXPECT_EQ(*e.gpe, 0.5);
  EXPECT_EQ(e.ffe, 0.5);
}

TEST(Pitch, IdenticalAndUnvoiced) {
  const PitchTrack ref{{100, 0, 120}, {true, false, true}};
  const PitchErrors same = pitch_errors(ref, ref);
  EXPECT_EQ(*same.gpe, 0.0);
  EXPECT_EQ(same.vde, 0.0);
  EXPECT_EQ(same.ffe, 0.0);
  const PitchTrack silent{{0, 0}, {false, false}};
  const PitchErrors e = pitch_errors(silent, silent);
  EXPECT_FALSE(e.gpe.has_value());
  EXPECT_EQ(e.vde, 0.0);
  EXPECT_EQ(e.ffe, 0.0);
}

TEST(Pitch, DecompositionAndScaleInvariance) {
  Rng rng(5);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 1 + rng.below(50);
    const PitchTrack a = random_track(n, rng);
    const PitchTrack b = random_track(n, rng);
    const PitchErrors e = pitch_errors(a, b);
    const double both = static_cast<double>(e.both_voiced) / static_cast<double>(n);
    EXPECT_NEAR(e.ffe, e.vde + e.gpe.value_or(0.0) * both, 1e-12);
    EXPECT_GE(e.ffe, e.vde);
    EXPECT_LE(e.ffe, 1.0);
    PitchTrack a2 = a, b2 = b;
    for (double& f : a2.f0) f *= 2.0;
    for (double& f : b2.f0) f *= 2.0;
    const PitchErrors e2 = pitch_errors(a2, b2);
    EXPECT_EQ(e2.gross_errors, e.gross_errors);
  }
}

TEST(Pitch, RejectsMalformedTracks) {
  EXPECT_THROW(pitch_errors(PitchTrack{{100}, {true}}, PitchTrack{{100, 0}, {true, false}}),
               ArgumentError);
  EXPECT_THROW(pitch_errors(PitchTrack{{0}, {true}}, PitchTrack{{0}, {true}}), ArgumentError);
  EXPECT_THROW(pitch_errors(PitchTrack{}, PitchTrack{}), ArgumentError);
}
