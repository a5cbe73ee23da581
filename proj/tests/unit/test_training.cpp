#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "tokdiff/diffusion.hpp"
#include "tokdiff/errors.hpp"
#include "tokdiff/oracles.hpp"
#include "tokdiff/training.hpp"

using namespace tokdiff;

namespace {

TokenGrid grid_of(int K, std::vector<int> tokens) {
  TokenGrid g(K, 1, static_cast<int>(tokens.size()));
  g.tokens = std::move(tokens);
  return g;
}

// Draws a grid position by position from per-position distributions.
TokenGrid draw(const std::vector<std::vector<double>>& marginals, Rng& rng) {
  TokenGrid g(4, 1, static_cast<int>(marginals.size()));
  for (std::size_t i = 0; i < marginals.size(); ++i) {
    g.tokens[i] = static_cast<int>(rng.categorical(marginals[i]));
  }
  return g;
}

double loss_only(int x_t, int x0, int t, const ScheduleTable& layer, std::vector<double> logits) {
  std::vector<double> grad(logits.size());
  return position_loss_and_gradient(x_t, x0, t, layer, logits, grad);
}

}  // namespace

TEST(Training, DefaultNullProbabilityIsTenPercent) {
  EXPECT_EQ(TrainConfig{}.null_prob, 0.1);
}

TEST(Training, GradientMatchesFiniteDifferences) {
  Rng rng(50);
  for (int rep = 0; rep < 40; ++rep) {
    const int K = 2 + rep % 4;
    const ScheduleTable layer = oracles::random_schedule(6, K, rng);
    const int t = 1 + static_cast<int>(rng.below(6));
    const int x0 = static_cast<int>(rng.below(K));
    const CategoricalDist m = marginal_xt_given_x0(x0, t, layer);
    const int x_t = static_cast<int>(rng.categorical(m.probs));
    std::vector<double> logits(K);
    for (double& v : logits) v = rng.normal();
    std::vector<double> grad(K);
    position_loss_and_gradient(x_t, x0, t, layer, logits, grad);
    for (int u = 0; u < K; ++u) {
      const double h = 1e-6;
      auto plus = logits;
      auto minus = logits;
      plus[u] += h;
      minus[u] -= h;
      const double fd = (loss_only(x_t, x0, t, layer, plus) - loss_only(x_t, x0, t, layer, minus)) /
                        (2.0 * h);
      EXPECT_NEAR(grad[u], fd, 1e-6) << "rep=" << rep << " u=" << u;
    }
  }
}

TEST(Training, RejectsBadInput) {
  const auto s = PositionalScheduleTable::uniform(linear_schedule(5, 4), 1, 3);
  EXPECT_THROW(train_denoiser({}, s, {}), ArgumentError);
  TokenGrid masked = grid_of(4, {0, 4, 1});
  EXPECT_THROW(train_denoiser({{masked, {}}}, s, {}), ArgumentError);
  TrainConfig bad;
  bad.null_prob = 1.5;
  EXPECT_THROW(train_denoiser({{grid_of(4, {0, 1, 2}), {}}}, s, bad), ArgumentError);
}

TEST(Training, RepeatedGridIsReproduced) {
  const auto s = PositionalScheduleTable::uniform(linear_schedule(10, 4), 1, 3);
  const TokenGrid x0 = grid_of(4, {2, 0, 3});
  std::vector<LabeledGrid> data(20, {x0, {}});
  TrainConfig cfg;
  cfg.epochs = 1000;
  cfg.seed = 4;
  const TrainResult r = train_denoiser(data, s, cfg);
  const auto samples = sample_many(r.denoiser, Condition::null(), s, {}, 9, 2000);
  int hits = 0;
  for (const auto& g : samples) hits += g == x0;
  EXPECT_GT(hits / 2000.0, 0.99);
}

TEST(Training, SmoothedLossHalvesFromInitialization) {
  const auto s = PositionalScheduleTable::uniform(linear_schedule(10, 4), 1, 3);
  const std::vector<std::vector<double>> marg{
      {0.9, 0.05, 0.03, 0.02}, {0.02, 0.9, 0.05, 0.03}, {0.03, 0.02, 0.9, 0.05}};
  Rng rng(60);
  std::vector<LabeledGrid> data;
  for (int n = 0; n < 200; ++n) data.push_back({draw(marg, rng), {}});

  // Loss of the untrained (uniform) model on the same data.
  const TabularDenoiser untrained(10, 4, 3, {});
  double init = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    Rng r = Rng::derive(61, n);
    init += vlb_loss(untrained, data[n].grid, {}, s, r, 10).value;
  }
  init /= static_cast<double>(data.size());

  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 62;
  const TrainResult r = train_denoiser(data, s, cfg);
  const auto smoothed = smooth(r.loss_trace, 5);
  EXPECT_LE(smoothed.back(), 0.5 * init);
  EXPECT_LT(smoothed.back(), smoothed.front());
}

TEST(Training, TwoClassToyMatchesPerLabelDistribution) {
  const auto s = PositionalScheduleTable::uniform(linear_schedule(10, 4), 1, 3);
  const std::vector<std::vector<double>> class_a{
      {0.9, 0.1, 0.0, 0.0}, {0.0, 0.8, 0.2, 0.0}, {0.7, 0.0, 0.0, 0.3}};
  const std::vector<std::vector<double>> class_b{
      {0.0, 0.0, 0.2, 0.8}, {0.1, 0.0, 0.0, 0.9}, {0.0, 0.6, 0.4, 0.0}};
  Rng rng(70);
  std::vector<LabeledGrid> data;
  std::vector<TokenGrid> a_grids, b_grids;
  for (int n = 0; n < 400; ++n) {
    const bool is_a = n % 2 == 0;
    TokenGrid g = draw(is_a ? class_a : class_b, rng);
    (is_a ? a_grids : b_grids).push_back(g);
    data.push_back({g, Condition::of(is_a ? 0 : 1)});
  }
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.seed = 71;
  const TrainResult r = train_denoiser(data, s, cfg);
  const auto samples_a = sample_many(r.denoiser, Condition::of(0), s, {}, 72, 4000);
  const auto samples_b = sample_many(r.denoiser, Condition::of(1), s, {}, 73, 4000);
  EXPECT_LT(oracles::total_variation(oracles::empirical(samples_a), oracles::empirical(a_grids)),
            0.1);
  EXPECT_LT(oracles::total_variation(oracles::empirical(samples_b), oracles::empirical(b_grids)),
            0.1);
}

TEST(Training, DeterministicUnderSeed) {
  const auto s = PositionalScheduleTable::uniform(linear_schedule(6, 3), 1, 2);
  std::vector<LabeledGrid> data{{grid_of(3, {0, 1}), Condition::of(5)},
                                {grid_of(3, {2, 1}), Condition::of(7)}};
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 80;
  const TrainResult a = train_denoiser(data, s, cfg);
  const TrainResult b = train_denoiser(data, s, cfg);
  EXPECT_EQ(a.denoiser.table(), b.denoiser.table());
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  EXPECT_THROW(a.denoiser.slot_of(Condition::of(6)), ArgumentError);
  EXPECT_EQ(a.denoiser.slot_of(Condition::null()), a.denoiser.slots() - 1);
}

TEST(Training, SmoothWindow) {
  const auto s = smooth({4.0, 2.0, 0.0, 2.0}, 2);
  EXPECT_EQ(s, (std::vector<double>{4.0, 3.0, 1.0, 1.0}));
  EXPECT_THROW(smooth({1.0}, 0), ArgumentError);
}
