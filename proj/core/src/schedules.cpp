#include "tokdiff/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tokdiff/errors.hpp"

namespace tokdiff {

namespace {

constexpr double kSimplexTol = 1e-12;
constexpr double kMonotoneSlack = 1e-15;

void require(bool ok, const std::string& what) {
  if (!ok) throw ScheduleError(what);
}

}  // namespace

std::string_view to_string(Layout layout) {
  return layout == Layout::concatenated ? "concatenated" : "interleaved";
}

Layout parse_layout(std::string_view name) {
  if (name == "concatenated") return Layout::concatenated;
  if (name == "interleaved") return Layout::interleaved;
  throw ArgumentError("unknown layout '" + std::string(name) + "'");
}

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::linear:
      return "linear";
    case ScheduleKind::improved:
      return "improved";
    case ScheduleKind::custom:
      return "custom";
  }
  return "custom";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "linear") return ScheduleKind::linear;
  if (name == "improved") return ScheduleKind::improved;
  if (name == "custom") return ScheduleKind::custom;
  throw ArgumentError("unknown schedule kind '" + std::string(name) + "'");
}

void ScheduleTable::validate() const {
  require(T >= 1, "schedule needs T >= 1");
  require(K >= 2, "schedule needs K >= 2");
  const auto n = static_cast<std::size_t>(T) + 1;
  require(alpha_bar.size() == n && beta_bar.size() == n && gamma_bar.size() == n,
          "cumulative arrays must have T + 1 entries");
  require(alpha.size() == n && beta.size() == n && gamma.size() == n,
          "stepwise arrays must have T + 1 entries");
  require(alpha_bar[0] == 1.0 && gamma_bar[0] == 0.0 && beta_bar[0] == 0.0,
          "schedule must be the identity at t = 0");
  for (int t = 0; t <= T; ++t) {
    for (double v : {alpha_bar[t], beta_bar[t], gamma_bar[t]}) {
      require(v >= 0.0 && v <= 1.0, "cumulative coefficient outside [0, 1] at t = " +
                                        std::to_string(t));
    }
    require(std::abs(alpha_bar[t] + K * beta_bar[t] + gamma_bar[t] - 1.0) <= kSimplexTol,
            "simplex closure violated at t = " + std::to_string(t));
    if (t == 0) continue;
    require(alpha_bar[t] <= alpha_bar[t - 1] + kMonotoneSlack,
            "alpha_bar increases at t = " + std::to_string(t));
    require(gamma_bar[t] + kMonotoneSlack >= gamma_bar[t - 1],
            "gamma_bar decreases at t = " + std::to_string(t));
    require(std::abs(alpha_bar[t] - alpha_bar[t - 1] * alpha[t]) <= kSimplexTol,
            "alpha recurrence violated at t = " + std::to_string(t));
    require(std::abs((1.0 - gamma_bar[t]) - (1.0 - gamma_bar[t - 1]) * (1.0 - gamma[t])) <=
                kSimplexTol,
            "gamma recurrence violated at t = " + std::to_string(t));
  }
}

ScheduleTable stepwise_from_cumulative(ScheduleTable table) {
  const int T = table.T;
  const int K = table.K;
  if (T < 1 || K < 2) throw ArgumentError("schedule needs T >= 1 and K >= 2");
  const auto n = static_cast<std::size_t>(T) + 1;
  if (table.alpha_bar.size() != n || table.gamma_bar.size() != n || table.beta_bar.size() != n) {
    throw ArgumentError("cumulative arrays must have T + 1 entries");
  }
  table.alpha.assign(n, 0.0);
  table.beta.assign(n, 0.0);
  table.gamma.assign(n, 0.0);
  table.alpha[0] = 1.0;

  for (int t = 1; t <= T; ++t) {
    const double a_prev = table.alpha_bar[t - 1];
    const double a_cur = table.alpha_bar[t];
    const double g_prev = table.gamma_bar[t - 1];
    const double g_cur = table.gamma_bar[t];
    require(a_cur <= a_prev + kMonotoneSlack, "alpha_bar increases at t = " + std::to_string(t));
    require(g_cur + kMonotoneSlack >= g_prev, "gamma_bar decreases at t = " + std::to_string(t));

    const double a = a_prev > 0.0 ? std::min(1.0, a_cur / a_prev) : 0.0;
    double g = g_prev < 1.0 ? 1.0 - (1.0 - g_cur) / (1.0 - g_prev) : 1.0;
    g = std::clamp(g, 0.0, 1.0);
    double b = (1.0 - a - g) / K;
    // A step whose uniform mass is negative cannot be a transition matrix.
    require(b >= -1e-12, "cumulatives imply negative uniform mass at t = " + std::to_string(t));
    b = std::max(b, 0.0);
    table.alpha[t] = a;
    table.gamma[t] = g;
    table.beta[t] = b;
  }
  return table;
}

ScheduleTable schedule_from_cumulative(int K, std::vector<double> alpha_bar,
                                       std::vector<double> gamma_bar) {
  if (alpha_bar.size() != gamma_bar.size() || alpha_bar.size() < 2) {
    throw ArgumentError("cumulative arrays must be equal length with at least 2 entries");
  }
  if (K < 2) throw ArgumentError("schedule needs K >= 2");
  ScheduleTable table;
  table.T = static_cast<int>(alpha_bar.size()) - 1;
  table.K = K;
  table.beta_bar.resize(alpha_bar.size());
  for (std::size_t t = 0; t < alpha_bar.size(); ++t) {
    const double rest = 1.0 - alpha_bar[t] - gamma_bar[t];
    require(rest >= -1e-9, "alpha_bar + gamma_bar exceeds 1 at t = " + std::to_string(t));
    table.beta_bar[t] = std::max(rest, 0.0) / K;
  }
  table.alpha_bar = std::move(alpha_bar);
  table.gamma_bar = std::move(gamma_bar);
  table = stepwise_from_cumulative(std::move(table));
  return table;
}

ScheduleTable linear_schedule(int T, int K) {
  if (T < 1) throw ArgumentError("linear_schedule: T must be >= 1");
  if (K < 2) throw ArgumentError("linear_schedule: K must be >= 2");
  ScheduleTable table;
  table.T = T;
  table.K = K;
  const auto n = static_cast<std::size_t>(T) + 1;
  table.alpha_bar.resize(n);
  table.gamma_bar.resize(n);
  table.beta_bar.resize(n);
  for (int t = 0; t <= T; ++t) {
    const double frac = static_cast<double>(t) / T;
    table.gamma_bar[t] = 0.9 * frac;
    table.beta_bar[t] = 0.1 * frac / K;
    // Closing the simplex from the other two keeps the 1e-12 invariant exact.
    table.alpha_bar[t] = 1.0 - table.gamma_bar[t] - K * table.beta_bar[t];
  }
  table.alpha_bar[T] = std::max(table.alpha_bar[T], 0.0);
  return stepwise_from_cumulative(std::move(table));
}

int PositionalScheduleTable::layer_of(std::size_t position) const {
  if (position >= length()) throw ArgumentError("position outside the token grid");
  if (layout == Layout::concatenated) return static_cast<int>(position / frames);
  return static_cast<int>(position % n_q);
}

void PositionalScheduleTable::validate() const {
  require(n_q >= 1 && frames >= 1, "positional schedule needs N_q >= 1 and L >= 1");
  require(static_cast<int>(layers.size()) == n_q, "one table per codebook layer required");
  for (const auto& layer : layers) {
    require(layer.T == T && layer.K == K, "layer tables disagree on T or K");
    layer.validate();
  }
}

PositionalScheduleTable PositionalScheduleTable::uniform(const ScheduleTable& table, int n_q,
                                                         int frames, Layout layout) {
  if (n_q < 1 || frames < 1) throw ArgumentError("N_q and L must be >= 1");
  PositionalScheduleTable out;
  out.kind = ScheduleKind::linear;
  out.T = table.T;
  out.K = table.K;
  out.n_q = n_q;
  out.frames = frames;
  out.layout = layout;
  out.layers.assign(n_q, table);
  return out;
}

PositionalScheduleTable improved_schedule(int T, int K, int n_q, Layout layout, int frames) {
  if (T < 1) throw ArgumentError("improved_schedule: T must be >= 1");
  if (K < 2) throw ArgumentError("improved_schedule: K must be >= 2");
  if (n_q < 1) throw ArgumentError("improved_schedule: N_q must be >= 1");
  if (frames < 1) throw ArgumentError("improved_schedule: L must be >= 1");

  PositionalScheduleTable out;
  out.kind = ScheduleKind::improved;
  out.T = T;
  out.K = K;
  out.n_q = n_q;
  out.frames = frames;
  out.layout = layout;
  out.layers.reserve(n_q);

  const auto n = static_cast<std::size_t>(T) + 1;
  for (int q = 0; q < n_q; ++q) {
    const double offset = std::exp(static_cast<double>(q) / (2.0 * n_q)) / (2.0 * T);
    ScheduleTable layer;
    layer.T = T;
    layer.K = K;
    layer.alpha_bar.assign(n, 0.0);
    layer.gamma_bar.assign(n, 0.0);
    layer.beta_bar.assign(n, 0.0);
    layer.alpha_bar[0] = 1.0;
    for (int t = 1; t <= T; ++t) {
      const double frac = static_cast<double>(t) / T;
      const double a = std::clamp(1.0 - frac - offset, 0.0, 1.0);
      // The uniform term 1 - alpha_bar - gamma_bar of the raw formula is zero.
      layer.alpha_bar[t] = a;
      layer.beta_bar[t] = 0.0;
      layer.gamma_bar[t] = std::clamp(1.0 - a - K * layer.beta_bar[t], 0.0, 1.0);
    }
    out.layers.push_back(stepwise_from_cumulative(std::move(layer)));
  }
  return out;
}

}  // namespace tokdiff
