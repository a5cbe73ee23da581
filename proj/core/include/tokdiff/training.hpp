#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tokdiff/denoiser.hpp"
#include "tokdiff/schedules.hpp"
#include "tokdiff/token_grid.hpp"

namespace tokdiff {

struct LabeledGrid {
  TokenGrid grid;
  Condition cond;
};

struct TrainConfig {
  int epochs = 50;
  // Base step of the per-entry Adagrad update.
  double learning_rate = 1.0;
  // Probability of replacing the condition with the null condition on each
  // step (classifier-free training).
  double null_prob = 0.1;
  std::uint64_t seed = 0;
};

struct TrainResult {
  TabularDenoiser denoiser;
  // Mean per-example VLB estimate (nats) for each epoch.
  std::vector<double> loss_trace;
};

// Fits a TabularDenoiser by stochastic gradient descent on the VLB. Each
// visit to a training grid samples t ~ U{1..T}, x_t ~ q(x_t | x0), drops the
// condition with probability null_prob, and takes one gradient step on
// sum_i KL(q(x_{t-1}|x_t,x0) || p_theta(x_{t-1}|x_t)) with respect to the
// logit rows that produced p_theta, scaled per entry (Adagrad).
TrainResult train_denoiser(const std::vector<LabeledGrid>& dataset,
                           const PositionalScheduleTable& schedule, const TrainConfig& config);

// One-position VLB term KL(q(x_{t-1}|x_t,x0) || p_theta(x_{t-1}|x_t)) where
// p_theta comes from softmax(logits); writes d loss / d logits into grad.
double position_loss_and_gradient(int x_t, int x0, int t, const ScheduleTable& layer,
                                  std::span<const double> logits, std::span<double> grad);

// Moving average of a loss trace with the given window.
std::vector<double> smooth(const std::vector<double>& trace, std::size_t window);

}  // namespace tokdiff
