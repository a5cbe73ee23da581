#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tokdiff/matrix.hpp"
#include "tokdiff/schedules.hpp"

namespace tokdiff {

// Distribution over the K + 1 token states; index K is the mask token.
struct CategoricalDist {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
  double sum() const;
  // Throws ContractError unless entries are >= 0 and sum to 1 within tol.
  void check(double tol = 1e-10) const;
};

// (K + 1) x (K + 1) column-stochastic matrix: column j is the distribution
// of x_t given x_{t-1} = j. Column K (mask) is absorbing.
struct TransitionMatrix {
  Matrix entries;

  int K() const { return static_cast<int>(entries.rows()) - 1; }
  double operator()(std::size_t to, std::size_t from) const { return entries(to, from); }
};

TransitionMatrix build_transition_matrix(double alpha, double beta, double gamma, int K);

// Transition matrix of step t of `table`.
TransitionMatrix step_matrix(const ScheduleTable& table, int t);

// q(x_t | x_0) = alpha_bar c(x_0) + beta_bar + (gamma_bar - beta_bar) c(mask).
CategoricalDist marginal_xt_given_x0(int x0, int t, const ScheduleTable& table);
CategoricalDist marginal_xt_given_x0(int x0, int t, const PositionalScheduleTable& table,
                                     std::size_t position);

// p(x_T) = [beta_bar_T, ..., beta_bar_T, gamma_bar_T]. Note that it carries
// no alpha_bar_T term, so it is only the exact endpoint when alpha_bar_T = 0.
CategoricalDist stationary_dist(const ScheduleTable& table);

// Coefficients of the aggregated kernel q(x_to | x_from) for from <= to. The
// aggregate of mask-and-uniform steps is again mask-and-uniform.
struct KernelCoefficients {
  double alpha = 1.0;
  double beta = 0.0;
  double gamma = 0.0;
};
KernelCoefficients span_kernel(const ScheduleTable& table, int from, int to);

// q(x_s | x_t, x_0) for s < t. Throws InconsistencyError if x_t is
// impossible given x_0.
CategoricalDist posterior_between(int x_t, int x0, int s, int t, const ScheduleTable& table);

// q(x_{t-1} | x_t, x_0).
CategoricalDist true_posterior(int x_t, int x0, int t, const ScheduleTable& table);
CategoricalDist true_posterior(int x_t, int x0, int t, const PositionalScheduleTable& table,
                               std::size_t position);

// Explicit product Q_t ... Q_1 of the stepwise matrices. Test oracle for the
// closed-form marginal; refuses K > 16 or T > 64.
TransitionMatrix brute_force_cumulative(int t, const ScheduleTable& table);

// KL(p || q) in nats over equal-length vectors. +inf when q = 0 where p > 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

}  // namespace tokdiff
