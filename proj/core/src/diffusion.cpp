#include "tokdiff/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "tokdiff/errors.hpp"

namespace tokdiff {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Stand-in for log 0 on the unconditional side of guidance so that
// (lambda + 1)(log p_cond - log p_uncond) stays finite.
constexpr double kLogFloor = -700.0;

void check_schedule_match(const TokenGrid& grid, const PositionalScheduleTable& schedule) {
  if (grid.K != schedule.K || grid.size() != schedule.length()) {
    throw ArgumentError("token grid shape does not match the schedule");
  }
}

void check_prediction(const Matrix& p, std::size_t n, int K) {
  if (p.rows() != n || p.cols() != static_cast<std::size_t>(K)) {
    throw ContractError("denoiser returned a matrix of the wrong shape");
  }
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (double v : p.row(i)) {
      if (!(v >= 0.0)) throw ContractError("denoiser returned a negative or NaN probability");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ContractError("denoiser distribution at position " + std::to_string(i) +
                          " sums to " + std::to_string(total));
    }
  }
}

std::vector<double> log_of(std::span<const double> p) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] > 0.0 ? std::log(p[i]) : kNegInf;
  return out;
}

}  // namespace

TokenGrid corrupt(const TokenGrid& x0, int t, const PositionalScheduleTable& schedule, Rng& rng) {
  x0.validate(false);
  check_schedule_match(x0, schedule);
  if (t < 0 || t > schedule.T) throw ArgumentError("corrupt: step out of range");
  TokenGrid out = x0;
  if (t == 0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const ScheduleTable& layer = schedule.at_position(i);
    const double u = rng.uniform();
    if (u < layer.alpha_bar[t]) continue;
    if (u < layer.alpha_bar[t] + layer.gamma_bar[t]) {
      out.tokens[i] = x0.K;
    } else {
      out.tokens[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(x0.K)));
    }
  }
  return out;
}

CategoricalDist cfg_combine(std::span<const double> log_p_cond,
                            std::span<const double> log_p_uncond, double lambda,
                            GuidanceMode mode) {
  if (!(lambda >= -1.0)) throw ArgumentError("guidance scale must be >= -1");
  if (log_p_cond.size() != log_p_uncond.size() || log_p_cond.empty()) {
    throw ArgumentError("cfg_combine: distributions differ in length");
  }
  const std::size_t n = log_p_cond.size();
  CategoricalDist out{std::vector<double>(n, 0.0)};

  if (lambda == 0.0) {
    for (std::size_t i = 0; i < n; ++i) out.probs[i] = std::exp(log_p_cond[i]);
  } else if (mode == GuidanceMode::log_space) {
    std::vector<double> logits(n, kNegInf);
    double hi = kNegInf;
    for (std::size_t i = 0; i < n; ++i) {
      if (log_p_cond[i] == kNegInf) continue;
      const double lu = std::max(log_p_uncond[i], kLogFloor);
      logits[i] = lu + (lambda + 1.0) * (log_p_cond[i] - lu);
      hi = std::max(hi, logits[i]);
    }
    if (hi == kNegInf) throw ContractError("conditional distribution has no support");
    for (std::size_t i = 0; i < n; ++i) {
      out.probs[i] = logits[i] == kNegInf ? 0.0 : std::exp(logits[i] - hi);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double pc = std::exp(log_p_cond[i]);
      const double pu = std::exp(log_p_uncond[i]);
      out.probs[i] = std::max(0.0, pu + (lambda + 1.0) * (pc - pu));
    }
  }

  double total = 0.0;
  for (double p : out.probs) total += p;
  if (!(total > 0.0)) throw ContractError("guided distribution has no mass");
  for (double& p : out.probs) p /= total;
  return out;
}

std::vector<double> reverse_kernel(int x_t, int s, int t, const ScheduleTable& layer,
                                   std::span<const double> p_x0) {
  const int K = layer.K;
  if (p_x0.size() != static_cast<std::size_t>(K)) throw ArgumentError("p_x0 must have K entries");
  if (s < 0 || s >= t || t > layer.T) throw ArgumentError("reverse_kernel needs 0 <= s < t <= T");
  if (x_t < 0 || x_t > K) throw ArgumentError("x_t out of range");

  // q(x_s | x_t, v) = row(k) q(x_s = k | v) / Z_v where row is row x_t of the
  // s -> t kernel and q(x_s = k | v) = alpha_bar_s [k == v] + base(k).
  const KernelCoefficients kern = span_kernel(layer, s, t);
  const double a_s = layer.alpha_bar[s];
  const double b_s = layer.beta_bar[s];
  const double g_s = layer.gamma_bar[s];
  auto row = [&](int k) {
    if (x_t == K) return k == K ? 1.0 : kern.gamma;
    if (k == K) return 0.0;
    return kern.beta + (k == x_t ? kern.alpha : 0.0);
  };

  double row_clean = 0.0;  // sum_{k < K} row(k)
  for (int k = 0; k < K; ++k) row_clean += row(k);
  const double shared = b_s * row_clean + g_s * row(K);

  std::vector<double> weight(K, 0.0);  // p_v / Z_v over feasible v
  double feasible_mass = 0.0;
  int feasible_count = 0;
  for (int v = 0; v < K; ++v) {
    const double z = a_s * row(v) + shared;
    if (z <= 0.0) continue;
    ++feasible_count;
    feasible_mass += p_x0[v];
    weight[v] = p_x0[v] / z;
  }
  if (feasible_count == 0) {
    throw InconsistencyError("x_t is impossible under every clean token");
  }
  if (!(feasible_mass > 0.0)) {
    // The model put all of its mass on impossible hypotheses; fall back to a
    // uniform prior over the feasible ones.
    for (int v = 0; v < K; ++v) {
      const double z = a_s * row(v) + shared;
      weight[v] = z > 0.0 ? 1.0 / z : 0.0;
    }
  }
  double weight_sum = 0.0;
  for (double w : weight) weight_sum += w;

  std::vector<double> out(K + 1, 0.0);
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    out[k] = row(k) * (a_s * weight[k] + b_s * weight_sum);
    total += out[k];
  }
  out[K] = row(K) * g_s * weight_sum;
  total += out[K];
  for (double& p : out) p /= total;
  return out;
}

Matrix guided_prediction(const Denoiser& denoiser, const TokenGrid& x_t, int t,
                         const Condition& cond, double lambda, GuidanceMode mode) {
  if (!(lambda >= -1.0)) throw ArgumentError("guidance scale must be >= -1");
  const std::size_t n = x_t.size();
  const int K = denoiser.K();
  Matrix p_cond = denoiser.predict(x_t, t, cond);
  check_prediction(p_cond, n, K);
  if (lambda == 0.0 || cond.is_null()) return p_cond;

  const Matrix p_uncond = denoiser.predict(x_t, t, Condition::null());
  check_prediction(p_uncond, n, K);
  for (std::size_t i = 0; i < n; ++i) {
    const auto lc = log_of(p_cond.row(i));
    const auto lu = log_of(p_uncond.row(i));
    const CategoricalDist guided = cfg_combine(lc, lu, lambda, mode);
    std::copy(guided.probs.begin(), guided.probs.end(), p_cond.row(i).begin());
  }
  return p_cond;
}

Matrix reverse_step_distribution(const TokenGrid& x_t, int t, int s, const Denoiser& denoiser,
                                 const Condition& cond, const PositionalScheduleTable& schedule,
                                 double lambda, GuidanceMode mode) {
  check_schedule_match(x_t, schedule);
  x_t.validate(true);
  if (t < 1 || t > schedule.T || s < 0 || s >= t) {
    throw ArgumentError("reverse step needs 0 <= s < t <= T");
  }
  const Matrix p_x0 = guided_prediction(denoiser, x_t, t, cond, lambda, mode);
  Matrix out(x_t.size(), static_cast<std::size_t>(schedule.K) + 1);
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    const auto kernel = reverse_kernel(x_t.tokens[i], s, t, schedule.at_position(i), p_x0.row(i));
    std::copy(kernel.begin(), kernel.end(), out.row(i).begin());
  }
  return out;
}

TokenGrid reverse_jump(const TokenGrid& x_t, int t, int s, const Denoiser& denoiser,
                       const Condition& cond, const PositionalScheduleTable& schedule,
                       double lambda, Rng& rng, GuidanceMode mode) {
  const Matrix dist = reverse_step_distribution(x_t, t, s, denoiser, cond, schedule, lambda, mode);
  TokenGrid out = x_t;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.tokens[i] = static_cast<int>(rng.categorical(dist.row(i)));
  }
  return out;
}

TokenGrid reverse_step(const TokenGrid& x_t, int t, const Denoiser& denoiser,
                       const Condition& cond, const PositionalScheduleTable& schedule,
                       double lambda, Rng& rng, GuidanceMode mode) {
  return reverse_jump(x_t, t, t - 1, denoiser, cond, schedule, lambda, rng, mode);
}

TokenGrid sample(const Denoiser& denoiser, const Condition& cond,
                 const PositionalScheduleTable& schedule, const SamplerOptions& options,
                 Rng& rng) {
  if (options.stride < 1) throw ArgumentError("stride must be >= 1");
  if (denoiser.K() != schedule.K) throw ArgumentError("denoiser and schedule disagree on K");

  TokenGrid x(schedule.K, schedule.n_q, schedule.frames, schedule.layout);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const CategoricalDist prior = stationary_dist(schedule.at_position(i));
    x.tokens[i] = static_cast<int>(rng.categorical(prior.probs));
  }

  int t = schedule.T;
  while (t > 0) {
    const int s = std::max(t - options.stride, 0);
    x = reverse_jump(x, t, s, denoiser, cond, schedule, options.guidance_scale, rng, options.mode);
    t = s;
  }

  if (x.has_mask()) {
    const Matrix p = guided_prediction(denoiser, x, 1, cond, options.guidance_scale, options.mode);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x.tokens[i] != x.K) continue;
      const auto r = p.row(i);
      x.tokens[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    }
  }
  return x;
}

std::vector<TokenGrid> sample_many(const Denoiser& denoiser, const Condition& cond,
                                   const PositionalScheduleTable& schedule,
                                   const SamplerOptions& options, std::uint64_t seed, int count,
                                   int threads) {
  if (count < 0) throw ArgumentError("count must be >= 0");
  threads = std::clamp(threads, 1, std::max(count, 1));
  std::vector<TokenGrid> out(static_cast<std::size_t>(count));
  auto run_chain = [&](int chain) {
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(chain));
    out[chain] = sample(denoiser, cond, schedule, options, rng);
  };
  if (threads == 1) {
    for (int c = 0; c < count; ++c) run_chain(c);
    return out;
  }

  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (int c = w; c < count; c += threads) run_chain(c);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& worker : workers) worker.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

double vlb_term(const Denoiser& denoiser, const TokenGrid& x0, const TokenGrid& x_t, int t,
                const Condition& cond, const PositionalScheduleTable& schedule) {
  const Matrix p_x0 = denoiser.predict(x_t, t, cond);
  check_prediction(p_x0, x_t.size(), schedule.K);
  double total = 0.0;
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    const ScheduleTable& layer = schedule.at_position(i);
    const CategoricalDist q = posterior_between(x_t.tokens[i], x0.tokens[i], t - 1, t, layer);
    const auto p = reverse_kernel(x_t.tokens[i], t - 1, t, layer, p_x0.row(i));
    total += kl_divergence(q.probs, p);
  }
  return total;
}

double prior_term(const TokenGrid& x0, const PositionalScheduleTable& schedule) {
  double total = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const ScheduleTable& layer = schedule.at_position(i);
    const CategoricalDist q = marginal_xt_given_x0(x0.tokens[i], schedule.T, layer);
    total += kl_divergence(q.probs, stationary_dist(layer).probs);
  }
  return total;
}

VlbEstimate vlb_loss(const Denoiser& denoiser, const TokenGrid& x0, const Condition& cond,
                     const PositionalScheduleTable& schedule, Rng& rng, int num_t_samples) {
  x0.validate(false);
  check_schedule_match(x0, schedule);
  if (num_t_samples < 1) throw ArgumentError("vlb_loss needs at least one t sample");

  VlbEstimate est;
  est.prior_term = prior_term(x0, schedule);
  if (!std::isfinite(est.prior_term)) {
    est.finite = false;
    est.diagnostic = "stationary distribution gives zero mass where q(x_T | x0) > 0";
  }

  const int T = schedule.T;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int n = 0; n < num_t_samples; ++n) {
    const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(T)));
    const TokenGrid x_t = corrupt(x0, t, schedule, rng);
    const double term = T * vlb_term(denoiser, x0, x_t, t, cond, schedule);
    if (!std::isfinite(term)) {
      est.finite = false;
      if (est.diagnostic.empty()) {
        est.diagnostic = "model assigns zero probability to a posterior state at t = " +
                         std::to_string(t);
      }
      continue;
    }
    sum += term;
    sum_sq += term * term;
  }
  const double mean = sum / num_t_samples;
  est.diffusion_term = mean;
  if (num_t_samples > 1) {
    const double var = std::max(0.0, (sum_sq - num_t_samples * mean * mean) / (num_t_samples - 1));
    est.std_error = std::sqrt(var / num_t_samples);
  }
  est.value = est.finite ? std::max(0.0, mean + est.prior_term)
                         : std::numeric_limits<double>::infinity();
  return est;
}

}  // namespace tokdiff
