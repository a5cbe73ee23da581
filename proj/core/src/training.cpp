#include "tokdiff/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tokdiff/diffusion.hpp"
#include "tokdiff/errors.hpp"
#include "tokdiff/random.hpp"
#include "tokdiff/transitions.hpp"

namespace tokdiff {

// p_theta(k) = sum_v M(k, v) pi_v / S with M(k, v) = q(x_{t-1} = k | x_t, v)
// and S the feasible mass of pi.
double position_loss_and_gradient(int x_t, int x0, int t, const ScheduleTable& layer,
                                  std::span<const double> logits, std::span<double> grad) {
  const int K = layer.K;
  if (logits.size() != static_cast<std::size_t>(K) || grad.size() != logits.size()) {
    throw ArgumentError("logit and gradient rows must have K entries");
  }
  std::fill(grad.begin(), grad.end(), 0.0);
  std::vector<double> pi(logits.begin(), logits.end());
  softmax_inplace(pi);

  const CategoricalDist q = posterior_between(x_t, x0, t - 1, t, layer);
  const auto p = reverse_kernel(x_t, t - 1, t, layer, pi);
  const double loss = kl_divergence(q.probs, p);

  const KernelCoefficients kern = span_kernel(layer, t - 1, t);
  const double a_s = layer.alpha_bar[t - 1];
  const double b_s = layer.beta_bar[t - 1];
  const double g_s = layer.gamma_bar[t - 1];
  auto row = [&](int k) {
    if (x_t == K) return k == K ? 1.0 : kern.gamma;
    if (k == K) return 0.0;
    return kern.beta + (k == x_t ? kern.alpha : 0.0);
  };
  double row_clean = 0.0;
  for (int k = 0; k < K; ++k) row_clean += row(k);
  const double shared = b_s * row_clean + g_s * row(K);

  // ratio(k) = -q_k / p_k ; C = sum_k ratio(k) row(k) base(k)
  std::vector<double> ratio(K + 1, 0.0);
  double c = 0.0;
  for (int k = 0; k <= K; ++k) {
    if (q.probs[k] <= 0.0) continue;
    ratio[k] = -q.probs[k] / p[k];
    c += ratio[k] * row(k) * (k == K ? g_s : b_s);
  }

  double feasible_mass = 0.0;
  std::vector<double> z(K);
  for (int v = 0; v < K; ++v) {
    z[v] = a_s * row(v) + shared;
    if (z[v] > 0.0) feasible_mass += pi[v];
  }
  if (!(feasible_mass > 0.0) || !std::isfinite(loss)) return loss;

  // dL/dpi_v = (sum_k ratio(k) M(k, v) + 1) / S for feasible v, else 0.
  std::vector<double> g(K, 0.0);
  double mean_g = 0.0;
  for (int v = 0; v < K; ++v) {
    if (z[v] <= 0.0) continue;
    const double inner = (ratio[v] * row(v) * a_s + c) / z[v];
    g[v] = (inner + 1.0) / feasible_mass;
    mean_g += pi[v] * g[v];
  }
  for (int u = 0; u < K; ++u) grad[u] = pi[u] * (g[u] - mean_g);
  return loss;
}

TrainResult train_denoiser(const std::vector<LabeledGrid>& dataset,
                           const PositionalScheduleTable& schedule, const TrainConfig& config) {
  if (dataset.empty()) throw ArgumentError("train_denoiser: empty dataset");
  if (config.epochs < 1) throw ArgumentError("train_denoiser: epochs must be >= 1");
  if (!(config.null_prob >= 0.0 && config.null_prob <= 1.0)) {
    throw ArgumentError("train_denoiser: null_prob must be in [0, 1]");
  }
  if (!(config.learning_rate > 0.0)) throw ArgumentError("train_denoiser: learning rate must be > 0");

  std::vector<int> labels;
  for (const auto& example : dataset) {
    example.grid.validate(false);
    if (example.grid.K != schedule.K || example.grid.size() != schedule.length() ||
        !example.grid.same_shape(dataset.front().grid)) {
      throw ArgumentError("train_denoiser: grids must share K, layout and the schedule's shape");
    }
    if (example.cond.label) labels.push_back(*example.cond.label);
  }

  TrainResult result{TabularDenoiser(schedule.T, schedule.K, schedule.length(), labels), {}};
  TabularDenoiser& model = result.denoiser;
  Rng rng(config.seed);
  const int T = schedule.T;

  std::vector<double> grad(static_cast<std::size_t>(schedule.K));
  // Adagrad accumulators, one per table entry.
  std::vector<double> accum(model.table().size(), 0.0);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with the library stream so runs are reproducible.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      const auto& example = dataset[idx];
      const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(T)));
      const TokenGrid x_t = corrupt(example.grid, t, schedule, rng);
      const bool drop = rng.uniform() < config.null_prob;
      const Condition cond = drop ? Condition::null() : example.cond;
      const std::size_t slot = model.slot_of(cond);
      double loss = 0.0;
      for (std::size_t i = 0; i < x_t.size(); ++i) {
        auto row = model.logits(t, i, x_t.tokens[i], slot);
        loss += position_loss_and_gradient(x_t.tokens[i], example.grid.tokens[i], t,
                                           schedule.at_position(i), row, grad);
        double* acc = accum.data() + (row.data() - model.table().data());
        for (std::size_t u = 0; u < row.size(); ++u) {
          acc[u] += grad[u] * grad[u];
          row[u] -= config.learning_rate * grad[u] / (std::sqrt(acc[u]) + 1e-8);
        }
      }
      epoch_loss += T * loss;
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(dataset.size()));
  }
  return result;
}

std::vector<double> smooth(const std::vector<double>& trace, std::size_t window) {
  if (window == 0) throw ArgumentError("smoothing window must be >= 1");
  std::vector<double> out;
  out.reserve(trace.size());
  double running = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    running += trace[i];
    if (i >= window) running -= trace[i - window];
    out.push_back(running / static_cast<double>(std::min(i + 1, window)));
  }
  return out;
}

}  // namespace tokdiff
