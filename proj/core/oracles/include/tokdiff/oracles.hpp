#pragma once

// Brute-force reference computations. They only use explicit transition
// matrices and enumeration, never the closed forms they are meant to check.

#include <cstdint>
#include <map>
#include <vector>

#include "tokdiff/denoiser.hpp"
#include "tokdiff/random.hpp"
#include "tokdiff/schedules.hpp"
#include "tokdiff/token_grid.hpp"

namespace tokdiff::oracles {

// Random valid schedule: each step draws alpha in [0.2, 1) and splits the
// rest between masking and uniform resampling.
ScheduleTable random_schedule(int T, int K, Rng& rng);

// max over (x0, t) of |closed-form marginal - column x0 of Q_t ... Q_1|.
double marginal_error(const ScheduleTable& table);

struct PosteriorCheck {
  double max_error = 0.0;          // vs Bayes over enumerated trajectories
  double max_sum_error = 0.0;      // |sum of posterior - 1|
  double max_marginal_error = 0.0;  // sum_{x_t} q(x_{t-1}|x_t,x0) q(x_t|x0) vs q(x_{t-1}|x0)
  std::size_t cases = 0;
};

// Enumerates every trajectory x_0 -> x_1 -> ... -> x_T, accumulates the joint
// of (x_{t-1}, x_t) for each x0 and compares Bayes' rule with true_posterior.
// Refuses (K + 1)^T > 2e6.
PosteriorCheck posterior_check(const ScheduleTable& table);

// Exhaustive VLB: sum_t sum_{x_t} q(x_t|x0) KL(q(x_{t-1}|x_t,x0) || p_theta) + prior
// for a single-position grid, from explicit matrices.
double enumerated_vlb(const Denoiser& denoiser, const TokenGrid& x0, const Condition& cond,
                      const ScheduleTable& table);

// Toy distribution over K = 4, N_q = 1, L = 3 grids.
std::vector<SupportPoint> toy_distribution();

// Total variation between sample frequencies and a support distribution.
// Samples outside the support count fully against the distance.
double total_variation(const std::vector<TokenGrid>& samples,
                       const std::vector<SupportPoint>& support);

// Empirical distribution of grids.
std::map<std::vector<int>, double> empirical(const std::vector<TokenGrid>& grids);
double total_variation(const std::map<std::vector<int>, double>& p,
                       const std::map<std::vector<int>, double>& q);

// Chi-square goodness of fit; returns the upper-tail p-value. Cells with zero
// expected count must also be empty (otherwise p = 0).
double chi_square_p_value(const std::vector<double>& observed, const std::vector<double>& expected);

}  // namespace tokdiff::oracles
