#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tokdiff/auxiliary.hpp"
#include "tokdiff/errors.hpp"
#include "tokdiff/random.hpp"

using namespace tokdiff;

namespace {

Matrix random_sim(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(n, n);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

Matrix permuted(const Matrix& m, const std::vector<std::size_t>& perm) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(perm[i], perm[j]);
  }
  return out;
}

PairedSamples gaussian_pairs(std::size_t n, double rho, std::uint64_t seed) {
  Rng rng(seed);
  PairedSamples s{Matrix(n, 1), Matrix(n, 1)};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    s.x(i, 0) = x;
    s.y(i, 0) = rho * x + std::sqrt(1.0 - rho * rho) * rng.normal();
  }
  return s;
}

}  // namespace

TEST(InfoNce, UniformSimilarityIsLogN) {
  for (std::size_t n : {2u, 5u, 64u}) {
    EXPECT_NEAR(info_nce(Matrix(n, n, 0.3), 0.07), std::log(static_cast<double>(n)), 1e-9);
  }
}

TEST(InfoNce, TwoByTwoHandValue) {
  const Matrix sim(2, 2, std::vector<double>{1, 0, 0, 1});
  EXPECT_NEAR(info_nce(sim, 1.0), -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0)), 1e-12);
  EXPECT_NEAR(info_nce(sim, 1.0), 0.3133, 1e-4);
}

TEST(InfoNce, SaturatesAndDecreasesWithDiagonal) {
  double previous = std::numeric_limits<double>::infinity();
  for (double s : {0.0, 1.0, 5.0, 20.0, 50.0}) {
    Matrix sim(8, 8, 0.0);
    for (std::size_t i = 0; i < 8; ++i) sim(i, i) = s;
    const double loss = info_nce(sim, 1.0);
    EXPECT_LT(loss, previous);
    EXPECT_GE(loss, 0.0);
    previous = loss;
  }
  EXPECT_LT(previous, 1e-3);
}

TEST(InfoNce, RejectsBadTemperature) {
  EXPECT_THROW(info_nce(Matrix(2, 2), 0.0), ArgumentError);
  EXPECT_THROW(info_nce(Matrix(2, 3), 1.0), ArgumentError);
}

TEST(RankingLoss, HandExample) {
  // (0,1): max(0, 0.2 - 0.5 + 0.9) + max(0, 0.2 - 0.6 + 0.9) = 1.1; (1,0): 0.
  const Matrix sim(2, 2, std::vector<double>{0.5, 0.9, 0.1, 0.6});
  EXPECT_NEAR(contrastive_ranking_loss(sim, 0.2), 0.55, 1e-12);
}

TEST(RankingLoss, SatisfiedMarginsGiveZero) {
  Matrix sim(4, 4, 0.0);
  for (std::size_t i = 0; i < 4; ++i) sim(i, i) = 1.0;
  EXPECT_EQ(contrastive_ranking_loss(sim, 0.5), 0.0);
  EXPECT_EQ(contrastive_ranking_loss(sim, 1.0), 0.0);
  EXPECT_GT(contrastive_ranking_loss(sim, 1.5), 0.0);
}

TEST(RankingLoss, ScalesOnActiveSet) {
  const Matrix sim = random_sim(6, 3);
  Matrix scaled = sim;
  for (double& v : scaled.data()) v *= 2.5;
  // With m = 0 every active hinge is linear in the scores.
  EXPECT_NEAR(contrastive_ranking_loss(scaled, 0.0), 2.5 * contrastive_ranking_loss(sim, 0.0),
              1e-12);
}

TEST(Recall, CraftedMatrix) {
  const Matrix sim(4, 4, std::vector<double>{5, 1, 1, 1,  //
                                             0, 3, 4, 1,  //
                                             9, 8, 1, 0,  //
                                             0, 0, 0, 1});
  EXPECT_DOUBLE_EQ(recall_at_k(sim, 1), 50.0);
  EXPECT_DOUBLE_EQ(recall_at_k(sim, 2), 75.0);
  EXPECT_DOUBLE_EQ(recall_at_k(sim, 4), 100.0);
}

TEST(Recall, TiesRankByCandidateIndex) {
  const Matrix sim(3, 3, 1.0);
  EXPECT_NEAR(recall_at_k(sim, 1), 100.0 / 3.0, 1e-12);
  EXPECT_NEAR(recall_at_k(sim, 2), 200.0 / 3.0, 1e-12);
}

TEST(Recall, MonotoneAndTransformInvariant) {
  const Matrix sim = random_sim(20, 4);
  Matrix transformed = sim;
  for (double& v : transformed.data()) v = std::exp(3.0 * v) + 1.0;
  double previous = 0.0;
  for (int k = 1; k <= 20; ++k) {
    const double r = recall_at_k(sim, k);
    EXPECT_GE(r, previous);
    EXPECT_EQ(r, recall_at_k(transformed, k));
    previous = r;
  }
  EXPECT_EQ(previous, 100.0);
  EXPECT_THROW(recall_at_k(sim, 0), ArgumentError);
  EXPECT_THROW(recall_at_k(sim, 21), ArgumentError);
}

TEST(Losses, PermutationEquivariant) {
  const Matrix sim = random_sim(7, 5);
  std::vector<std::size_t> perm(7);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(6);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  const Matrix p = permuted(sim, perm);
  EXPECT_NEAR(info_nce(p, 0.5), info_nce(sim, 0.5), 1e-12);
  EXPECT_NEAR(contrastive_ranking_loss(p, 0.3), contrastive_ranking_loss(sim, 0.3), 1e-12);
}

TEST(Club, CorrelatedGaussianAboveTrueMi) {
  const double rho = 0.9;
  const double truth = -0.5 * std::log(1.0 - rho * rho);
  const ClubEstimate e = club_mi(gaussian_pairs(10000, rho, 7));
  EXPECT_GE(e.value, truth - 0.05);
  EXPECT_FALSE(e.variance_floored);
  // Linear-Gaussian closed form of the bound: rho^2 / (1 - rho^2).
  EXPECT_NEAR(e.value, rho * rho / (1.0 - rho * rho), 0.2);
}

TEST(Club, IndependentNearZero) {
  EXPECT_LT(std::abs(club_mi(gaussian_pairs(10000, 0.0, 8)).value), 0.05);
}

TEST(Club, UpperBoundAcrossCorrelations) {
  for (double rho : {-0.95, -0.5, 0.3, 0.7, 0.95}) {
    const double truth = -0.5 * std::log(1.0 - rho * rho);
    EXPECT_GE(club_mi(gaussian_pairs(10000, rho, 9)).value, truth - 0.05) << "rho=" << rho;
  }
}

TEST(Club, DeterministicDependenceIsFlagged) {
  PairedSamples s = gaussian_pairs(200, 0.0, 10);
  s.y = s.x;
  const ClubEstimate e = club_mi(s);
  EXPECT_TRUE(e.variance_floored);
  EXPECT_TRUE(std::isfinite(e.value));
  EXPECT_GT(e.value, 1e6);
  EXPECT_FALSE(e.diagnostic.empty());
}

TEST(Club, RequiresEnoughSamples) {
  EXPECT_THROW(club_mi(gaussian_pairs(19, 0.5, 11)), ArgumentError);
  EXPECT_NO_THROW(club_mi(gaussian_pairs(20, 0.5, 11)));
}

TEST(Objective, CombinesTerms) {
  ObjectiveTerms t;
  t.diffusion = 1.0;
  t.content_mi = 0.5;
  t.speaker_mi = 0.25;
  t.embedding = 2.0;
  t.content_fit = 0.1;
  t.speaker_fit = 0.2;
  EXPECT_NEAR(combined_objective(t), 1.0 + 0.5 + 0.25 + 2.0 - 0.1 - 0.2, 1e-15);
  ObjectiveWeights w;
  w.embedding = 0.0;
  EXPECT_NEAR(combined_objective(t, w), 1.0 + 0.5 + 0.25 - 0.1 - 0.2, 1e-15);
  EXPECT_NEAR(embedding_distance(Matrix(2, 2, 1.0), Matrix(2, 2, 0.0)), 2.0, 1e-15);
}
