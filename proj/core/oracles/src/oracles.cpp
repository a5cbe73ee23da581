#include "tokdiff/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tokdiff/errors.hpp"
#include "tokdiff/transitions.hpp"

namespace tokdiff::oracles {

ScheduleTable random_schedule(int T, int K, Rng& rng) {
  std::vector<double> alpha_bar(T + 1, 1.0);
  std::vector<double> gamma_bar(T + 1, 0.0);
  double keep = 1.0;
  double unmasked = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double a = 0.2 + 0.8 * rng.uniform();
    const double g = (1.0 - a) * rng.uniform();
    keep *= a;
    unmasked *= 1.0 - g;
    alpha_bar[t] = keep;
    gamma_bar[t] = 1.0 - unmasked;
  }
  return schedule_from_cumulative(K, alpha_bar, gamma_bar);
}

double marginal_error(const ScheduleTable& table) {
  double worst = 0.0;
  for (int t = 0; t <= table.T; ++t) {
    const TransitionMatrix product = brute_force_cumulative(t, table);
    for (int x0 = 0; x0 < table.K; ++x0) {
      const CategoricalDist closed = marginal_xt_given_x0(x0, t, table);
      for (int v = 0; v <= table.K; ++v) {
        worst = std::max(worst, std::abs(closed.probs[v] - product(v, x0)));
      }
    }
  }
  return worst;
}

PosteriorCheck posterior_check(const ScheduleTable& table) {
  const int K = table.K;
  const int S = K + 1;
  const int T = table.T;
  if (std::pow(static_cast<double>(S), T) > 2e6) {
    throw RefusalError("posterior_check is limited to (K + 1)^T <= 2e6");
  }
  std::vector<TransitionMatrix> steps;
  for (int t = 1; t <= T; ++t) steps.push_back(step_matrix(table, t));

  PosteriorCheck check;
  for (int x0 = 0; x0 < K; ++x0) {
    // joint[t][a][b] = P(x_{t-1} = a, x_t = b | x0) for t = 1..T.
    std::vector<std::vector<double>> joint(T + 1, std::vector<double>(S * S, 0.0));
    std::vector<int> path(T + 1, 0);
    std::vector<double> prob(T + 1, 0.0);
    path[0] = x0;
    prob[0] = 1.0;
    // Enumerate every prefix x_0..x_depth.
    for (int depth = 1; depth <= T; ++depth) {
      auto prefix = [&](auto&& self, int t) -> void {
        for (int next = 0; next < S; ++next) {
          const double p = prob[t - 1] * steps[t - 1](next, path[t - 1]);
          if (p == 0.0) continue;
          path[t] = next;
          prob[t] = p;
          if (t == depth) {
            joint[depth][path[t - 1] * S + next] += p;
          } else {
            self(self, t + 1);
          }
        }
      };
      prefix(prefix, 1);
    }

    for (int t = 1; t <= T; ++t) {
      std::vector<double> recon(S, 0.0);
      for (int b = 0; b < S; ++b) {
        double z = 0.0;
        for (int a = 0; a < S; ++a) z += joint[t][a * S + b];
        if (z <= 0.0) continue;
        const CategoricalDist post = true_posterior(b, x0, t, table);
        ++check.cases;
        check.max_sum_error = std::max(check.max_sum_error, std::abs(post.sum() - 1.0));
        for (int a = 0; a < S; ++a) {
          check.max_error = std::max(check.max_error, std::abs(post.probs[a] - joint[t][a * S + b] / z));
          recon[a] += post.probs[a] * z;
        }
      }
      // sum_{x_t} q(x_{t-1} | x_t, x0) q(x_t | x0) must give back q(x_{t-1} | x0).
      for (int a = 0; a < S; ++a) {
        double prev = 0.0;
        for (int b = 0; b < S; ++b) prev += joint[t][a * S + b];
        check.max_marginal_error = std::max(check.max_marginal_error, std::abs(recon[a] - prev));
      }
    }
  }
  return check;
}

double enumerated_vlb(const Denoiser& denoiser, const TokenGrid& x0, const Condition& cond,
                      const ScheduleTable& table) {
  if (x0.size() != 1) throw ArgumentError("enumerated_vlb handles single-position grids");
  const int K = table.K;
  const int S = K + 1;
  const int v0 = x0.tokens[0];
  double total = 0.0;
  for (int t = 1; t <= table.T; ++t) {
    const TransitionMatrix step = step_matrix(table, t);
    const TransitionMatrix before = brute_force_cumulative(t - 1, table);
    const TransitionMatrix upto = brute_force_cumulative(t, table);
    for (int xt = 0; xt < S; ++xt) {
      const double w = upto(xt, v0);
      if (w <= 0.0) continue;
      // q(x_{t-1} | x_t, v) for any clean v by Bayes on explicit matrices.
      auto posterior = [&](int v) {
        std::vector<double> p(S, 0.0);
        double z = 0.0;
        for (int a = 0; a < S; ++a) {
          p[a] = step(xt, a) * before(a, v);
          z += p[a];
        }
        if (z > 0.0) {
          for (double& x : p) x /= z;
        }
        return std::make_pair(p, z);
      };
      const auto q = posterior(v0).first;
      TokenGrid xt_grid = x0;
      xt_grid.tokens[0] = xt;
      const Matrix pred = denoiser.predict(xt_grid, t, cond);
      std::vector<double> model(S, 0.0);
      double mass = 0.0;
      for (int v = 0; v < K; ++v) {
        const auto [p, z] = posterior(v);
        if (z <= 0.0) continue;
        mass += pred(0, v);
        for (int a = 0; a < S; ++a) model[a] += pred(0, v) * p[a];
      }
      for (double& m : model) m /= mass;
      double kl = 0.0;
      for (int a = 0; a < S; ++a) {
        if (q[a] <= 0.0) continue;
        if (model[a] <= 0.0) return std::numeric_limits<double>::infinity();
        kl += q[a] * std::log(q[a] / model[a]);
      }
      total += w * kl;
    }
  }
  const TransitionMatrix full = brute_force_cumulative(table.T, table);
  const CategoricalDist prior = stationary_dist(table);
  for (int a = 0; a < S; ++a) {
    const double q = full(a, v0);
    if (q <= 0.0) continue;
    if (prior.probs[a] <= 0.0) return std::numeric_limits<double>::infinity();
    total += q * std::log(q / prior.probs[a]);
  }
  return total;
}

std::vector<SupportPoint> toy_distribution() {
  const std::vector<std::pair<std::vector<int>, double>> points = {
      {{0, 1, 2}, 0.30}, {{1, 1, 3}, 0.20}, {{2, 0, 0}, 0.15},
      {{3, 3, 3}, 0.15}, {{0, 2, 1}, 0.10}, {{1, 3, 2}, 0.10},
  };
  std::vector<SupportPoint> out;
  for (const auto& [tokens, p] : points) {
    TokenGrid g(4, 1, 3);
    g.tokens = tokens;
    out.push_back({g, p, Condition::null()});
  }
  return out;
}

std::map<std::vector<int>, double> empirical(const std::vector<TokenGrid>& grids) {
  std::map<std::vector<int>, double> freq;
  for (const auto& g : grids) freq[g.tokens] += 1.0;
  for (auto& [k, v] : freq) v /= static_cast<double>(grids.size());
  return freq;
}

double total_variation(const std::map<std::vector<int>, double>& p,
                       const std::map<std::vector<int>, double>& q) {
  double tv = 0.0;
  for (const auto& [k, v] : p) {
    const auto it = q.find(k);
    tv += std::abs(v - (it == q.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : q) {
    if (!p.contains(k)) tv += v;
  }
  return 0.5 * tv;
}

double total_variation(const std::vector<TokenGrid>& samples,
                       const std::vector<SupportPoint>& support) {
  std::map<std::vector<int>, double> truth;
  for (const auto& s : support) truth[s.grid.tokens] += s.prob;
  return total_variation(empirical(samples), truth);
}

namespace {

// Regularized upper incomplete gamma Q(a, x) by series / continued fraction.
double gamma_q(double a, double x) {
  if (x <= 0.0) return 1.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double sum = 1.0 / a;
    double term = sum;
    for (int n = 1; n < 1000; ++n) {
      term *= x / (a + n);
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-15) break;
    }
    return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
  }
  double b = x + 1.0 - a;
  double c = 1.0 / 1e-300;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 1000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - gln) * h;
}

}  // namespace

double chi_square_p_value(const std::vector<double>& observed, const std::vector<double>& expected) {
  if (observed.size() != expected.size()) throw ArgumentError("chi-square: size mismatch");
  double stat = 0.0;
  int cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] <= 0.0) {
      if (observed[i] > 0.0) return 0.0;
      continue;
    }
    const double d = observed[i] - expected[i];
    stat += d * d / expected[i];
    ++cells;
  }
  if (cells < 2) return 1.0;
  return gamma_q(0.5 * (cells - 1), 0.5 * stat);
}

}  // namespace tokdiff::oracles
