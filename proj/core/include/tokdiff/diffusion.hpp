#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tokdiff/denoiser.hpp"
#include "tokdiff/random.hpp"
#include "tokdiff/schedules.hpp"
#include "tokdiff/token_grid.hpp"
#include "tokdiff/transitions.hpp"

namespace tokdiff {

// Forward corruption: every position is drawn independently from
// q(x_t | x_0) of its codebook layer. t = 0 returns x0 unchanged.
TokenGrid corrupt(const TokenGrid& x0, int t, const PositionalScheduleTable& schedule, Rng& rng);

enum class GuidanceMode {
  // log p_uncond + (lambda + 1) (log p_cond - log p_uncond), renormalized.
  log_space,
  // p_uncond + (lambda + 1) (p_cond - p_uncond), negatives clamped to 0.
  prob_space,
};

// Classifier-free guidance over distributions given as log probabilities.
// Entries equal to -inf are zero-probability states. Requires lambda >= -1.
CategoricalDist cfg_combine(std::span<const double> log_p_cond,
                            std::span<const double> log_p_uncond, double lambda,
                            GuidanceMode mode = GuidanceMode::log_space);

// p_theta(x_s | x_t) for one position:
//   sum_v q(x_s | x_t, x0 = v) p(x0~ = v | x_t)
// over the K + 1 states. Clean-token hypotheses v under which x_t is
// impossible are dropped and the remaining mass renormalized.
std::vector<double> reverse_kernel(int x_t, int s, int t, const ScheduleTable& layer,
                                   std::span<const double> p_x0);

// Denoiser prediction with guidance applied. With lambda == 0 or a null
// condition only the conditional pass is run. Throws ContractError if the
// denoiser output leaves the simplex.
Matrix guided_prediction(const Denoiser& denoiser, const TokenGrid& x_t, int t,
                         const Condition& cond, double lambda, GuidanceMode mode);

struct SamplerOptions {
  double guidance_scale = 0.0;
  GuidanceMode mode = GuidanceMode::log_space;
  int stride = 1;
};

// Per-position distribution of x_s given x_t (an N x (K + 1) matrix).
Matrix reverse_step_distribution(const TokenGrid& x_t, int t, int s, const Denoiser& denoiser,
                                 const Condition& cond, const PositionalScheduleTable& schedule,
                                 double lambda, GuidanceMode mode = GuidanceMode::log_space);

// One reverse move x_t -> x_{t-1}.
TokenGrid reverse_step(const TokenGrid& x_t, int t, const Denoiser& denoiser,
                       const Condition& cond, const PositionalScheduleTable& schedule,
                       double lambda, Rng& rng, GuidanceMode mode = GuidanceMode::log_space);

// Reverse move x_t -> x_s for an arbitrary earlier step s.
TokenGrid reverse_jump(const TokenGrid& x_t, int t, int s, const Denoiser& denoiser,
                       const Condition& cond, const PositionalScheduleTable& schedule,
                       double lambda, Rng& rng, GuidanceMode mode = GuidanceMode::log_space);

// Draws x_T from the stationary distribution and walks t = T -> 0 with the
// given stride. Masks left at t = 0 are replaced by the denoiser's argmax.
TokenGrid sample(const Denoiser& denoiser, const Condition& cond,
                 const PositionalScheduleTable& schedule, const SamplerOptions& options, Rng& rng);

// `count` independent chains; chain i uses Rng::derive(seed, i), so the result
// does not depend on `threads`.
std::vector<TokenGrid> sample_many(const Denoiser& denoiser, const Condition& cond,
                                   const PositionalScheduleTable& schedule,
                                   const SamplerOptions& options, std::uint64_t seed, int count,
                                   int threads = 1);

struct VlbEstimate {
  double value = 0.0;      // nats; +inf when the model gives zero mass to a posterior state
  double std_error = 0.0;  // Monte-Carlo standard error of the diffusion term
  double diffusion_term = 0.0;
  double prior_term = 0.0;
  bool finite = true;
  std::string diagnostic;
};

// Unbiased estimate of
//   sum_{t=1..T} E_{x_t ~ q(x_t|x0)} KL(q(x_{t-1}|x_t,x0) || p_theta(x_{t-1}|x_t))
//   + KL(q(x_T|x0) || p(x_T))
// from `num_t_samples` draws of (t, x_t). The t = 1 term is the reconstruction
// term -log p_theta(x0 | x_1).
VlbEstimate vlb_loss(const Denoiser& denoiser, const TokenGrid& x0, const Condition& cond,
                     const PositionalScheduleTable& schedule, Rng& rng, int num_t_samples);

// Sum over positions of KL(q(x_{t-1}|x_t,x0) || p_theta(x_{t-1}|x_t)) for a
// fixed corrupted grid.
double vlb_term(const Denoiser& denoiser, const TokenGrid& x0, const TokenGrid& x_t, int t,
                const Condition& cond, const PositionalScheduleTable& schedule);

// Sum over positions of KL(q(x_T | x0) || p(x_T)).
double prior_term(const TokenGrid& x0, const PositionalScheduleTable& schedule);

}  // namespace tokdiff
