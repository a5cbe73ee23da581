#include "tokdiff/transitions.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "tokdiff/errors.hpp"

namespace tokdiff {

namespace {

void check_step(int t, const ScheduleTable& table) {
  if (t < 0 || t > table.T) {
    throw ArgumentError("step " + std::to_string(t) + " outside 0.." + std::to_string(table.T));
  }
}

void check_token(int token, int K, const char* what, bool allow_mask) {
  const int upper = allow_mask ? K : K - 1;
  if (token < 0 || token > upper) {
    throw ArgumentError(std::string(what) + " token " + std::to_string(token) + " out of range");
  }
}

}  // namespace

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ArgumentError("matrix product shape mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

double CategoricalDist::sum() const {
  double s = 0.0;
  for (double p : probs) s += p;
  return s;
}

void CategoricalDist::check(double tol) const {
  for (double p : probs) {
    if (!(p >= 0.0)) throw ContractError("distribution has a negative or NaN entry");
  }
  if (std::abs(sum() - 1.0) > tol) throw ContractError("distribution does not sum to 1");
}

TransitionMatrix build_transition_matrix(double alpha, double beta, double gamma, int K) {
  if (K < 1) throw ArgumentError("transition matrix needs K >= 1");
  if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) {
    throw ArgumentError("transition coefficients must be nonnegative");
  }
  if (std::abs(alpha + K * beta + gamma - 1.0) > 1e-9) {
    throw ArgumentError("alpha + K*beta + gamma must equal 1");
  }
  TransitionMatrix q{Matrix(K + 1, K + 1)};
  for (int from = 0; from < K; ++from) {
    for (int to = 0; to < K; ++to) q.entries(to, from) = beta;
    q.entries(from, from) += alpha;
    q.entries(K, from) = gamma;
  }
  q.entries(K, K) = 1.0;
  return q;
}

TransitionMatrix step_matrix(const ScheduleTable& table, int t) {
  if (t < 1 || t > table.T) throw ArgumentError("step matrix needs 1 <= t <= T");
  return build_transition_matrix(table.alpha[t], table.beta[t], table.gamma[t], table.K);
}

CategoricalDist marginal_xt_given_x0(int x0, int t, const ScheduleTable& table) {
  check_step(t, table);
  check_token(x0, table.K, "x0", false);
  const int K = table.K;
  CategoricalDist d{std::vector<double>(K + 1, table.beta_bar[t])};
  d.probs[x0] += table.alpha_bar[t];
  d.probs[K] = table.gamma_bar[t];
  return d;
}

CategoricalDist marginal_xt_given_x0(int x0, int t, const PositionalScheduleTable& table,
                                     std::size_t position) {
  return marginal_xt_given_x0(x0, t, table.at_position(position));
}

CategoricalDist stationary_dist(const ScheduleTable& table) {
  const int K = table.K;
  CategoricalDist d{std::vector<double>(K + 1, table.beta_bar[table.T])};
  d.probs[K] = table.gamma_bar[table.T];
  return d;
}

KernelCoefficients span_kernel(const ScheduleTable& table, int from, int to) {
  check_step(from, table);
  check_step(to, table);
  if (from > to) throw ArgumentError("span_kernel needs from <= to");
  if (from == to) return {};
  if (to == from + 1) return {table.alpha[to], table.beta[to], table.gamma[to]};
  KernelCoefficients k;
  const double a_from = table.alpha_bar[from];
  const double g_from = table.gamma_bar[from];
  k.alpha = a_from > 0.0 ? table.alpha_bar[to] / a_from : 0.0;
  k.gamma = g_from < 1.0 ? 1.0 - (1.0 - table.gamma_bar[to]) / (1.0 - g_from) : 1.0;
  k.beta = std::max(0.0, (1.0 - k.alpha - k.gamma) / table.K);
  return k;
}

CategoricalDist posterior_between(int x_t, int x0, int s, int t, const ScheduleTable& table) {
  check_step(t, table);
  check_token(x_t, table.K, "x_t", true);
  check_token(x0, table.K, "x0", false);
  if (s < 0 || s >= t) throw ArgumentError("posterior needs 0 <= s < t");
  const int K = table.K;
  const KernelCoefficients k = span_kernel(table, s, t);
  const CategoricalDist prior = marginal_xt_given_x0(x0, s, table);

  // Row x_t of the aggregated kernel, times q(x_s | x_0).
  CategoricalDist post{std::vector<double>(K + 1, 0.0)};
  double z = 0.0;
  for (int v = 0; v <= K; ++v) {
    double kernel;
    if (x_t == K) {
      kernel = v == K ? 1.0 : k.gamma;
    } else {
      kernel = v == K ? 0.0 : k.beta + (v == x_t ? k.alpha : 0.0);
    }
    post.probs[v] = kernel * prior.probs[v];
    z += post.probs[v];
  }
  if (!(z > 0.0)) {
    throw InconsistencyError("x_t = " + std::to_string(x_t) + " is impossible given x0 = " +
                             std::to_string(x0) + " at t = " + std::to_string(t));
  }
  for (double& p : post.probs) p /= z;
  return post;
}

CategoricalDist true_posterior(int x_t, int x0, int t, const ScheduleTable& table) {
  if (t < 1) throw ArgumentError("true_posterior needs t >= 1");
  return posterior_between(x_t, x0, t - 1, t, table);
}

CategoricalDist true_posterior(int x_t, int x0, int t, const PositionalScheduleTable& table,
                               std::size_t position) {
  return true_posterior(x_t, x0, t, table.at_position(position));
}

TransitionMatrix brute_force_cumulative(int t, const ScheduleTable& table) {
  if (table.K > 16 || table.T > 64) {
    throw RefusalError("brute_force_cumulative is limited to K <= 16 and T <= 64");
  }
  check_step(t, table);
  TransitionMatrix acc{Matrix::identity(table.K + 1)};
  for (int step = 1; step <= t; ++step) {
    acc.entries = step_matrix(table, step).entries * acc.entries;
  }
  return acc;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ArgumentError("kl_divergence: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  }
  return kl < 0.0 ? 0.0 : kl;
}

}  // namespace tokdiff
