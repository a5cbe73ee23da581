#include "tokdiff/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tokdiff/errors.hpp"
#include "tokdiff/transitions.hpp"

namespace tokdiff {

void softmax_inplace(std::span<double> values) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values) hi = std::max(hi, v);
  double total = 0.0;
  for (double& v : values) {
    v = std::exp(v - hi);
    total += v;
  }
  for (double& v : values) v /= total;
}

BayesOracleDenoiser::BayesOracleDenoiser(std::vector<SupportPoint> support,
                                         PositionalScheduleTable schedule)
    : support_(std::move(support)), schedule_(std::move(schedule)) {
  if (support_.empty()) throw ArgumentError("Bayes oracle needs a nonempty support");
  if (support_.size() > kMaxSupport) {
    throw RefusalError("Bayes oracle support of " + std::to_string(support_.size()) +
                       " grids exceeds the enumeration limit of " + std::to_string(kMaxSupport));
  }
  double total = 0.0;
  for (const auto& point : support_) {
    point.grid.validate(false);
    if (point.grid.K != schedule_.K || point.grid.size() != schedule_.length()) {
      throw ArgumentError("support grid shape does not match the schedule");
    }
    if (!(point.prob >= 0.0)) throw ArgumentError("support probabilities must be >= 0");
    total += point.prob;
  }
  if (!(total > 0.0)) throw ArgumentError("support probabilities sum to zero");
  for (auto& point : support_) point.prob /= total;
}

Matrix BayesOracleDenoiser::predict(const TokenGrid& x_t, int t, const Condition& cond) const {
  const int K = schedule_.K;
  const std::size_t n = schedule_.length();
  if (x_t.size() != n || x_t.K != K) throw ArgumentError("x_t shape does not match the schedule");
  if (t < 0 || t > schedule_.T) throw ArgumentError("step out of range");

  // Log joint weight log p(x0) + sum_i log q(x_t[i] | x0[i]) for every support point.
  std::vector<double> logw(support_.size(), -std::numeric_limits<double>::infinity());
  double hi = -std::numeric_limits<double>::infinity();
  bool any_match = false;
  for (std::size_t s = 0; s < support_.size(); ++s) {
    const auto& point = support_[s];
    if (!cond.is_null() && point.cond != cond) continue;
    any_match = true;
    if (point.prob <= 0.0) continue;
    double lw = std::log(point.prob);
    for (std::size_t i = 0; i < n && std::isfinite(lw); ++i) {
      const ScheduleTable& layer = schedule_.at_position(i);
      const int x0 = point.grid.tokens[i];
      const int xt = x_t.tokens[i];
      double q;
      if (xt == K) {
        q = layer.gamma_bar[t];
      } else {
        q = layer.beta_bar[t] + (xt == x0 ? layer.alpha_bar[t] : 0.0);
      }
      lw = q > 0.0 ? lw + std::log(q) : -std::numeric_limits<double>::infinity();
    }
    logw[s] = lw;
    hi = std::max(hi, lw);
  }
  if (!any_match) throw ArgumentError("no support point carries the requested label");
  if (!std::isfinite(hi)) {
    throw InconsistencyError("x_t has zero probability under every support point");
  }

  Matrix out(n, K);
  double total = 0.0;
  for (std::size_t s = 0; s < support_.size(); ++s) {
    if (!std::isfinite(logw[s])) continue;
    const double w = std::exp(logw[s] - hi);
    total += w;
    for (std::size_t i = 0; i < n; ++i) out(i, support_[s].grid.tokens[i]) += w;
  }
  for (double& v : out.data()) v /= total;
  return out;
}

TabularDenoiser::TabularDenoiser(int T, int K, std::size_t positions, std::vector<int> labels)
    : T_(T), K_(K), positions_(positions), labels_(std::move(labels)) {
  if (T < 1 || K < 2 || positions < 1) throw ArgumentError("tabular denoiser needs T, K, N >= 1");
  std::sort(labels_.begin(), labels_.end());
  labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
  const double entries = static_cast<double>(T) * static_cast<double>(positions) * (K + 1) *
                         static_cast<double>(slots()) * K;
  if (entries > static_cast<double>(kMaxEntries)) {
    throw RefusalError("tabular denoiser would need " + std::to_string(entries) +
                       " entries; limit is " + std::to_string(kMaxEntries));
  }
  table_.assign(static_cast<std::size_t>(entries), 0.0);
}

std::size_t TabularDenoiser::slot_of(const Condition& cond) const {
  if (cond.is_null()) return labels_.size();
  const auto it = std::lower_bound(labels_.begin(), labels_.end(), *cond.label);
  if (it == labels_.end() || *it != *cond.label) {
    throw ArgumentError("label " + std::to_string(*cond.label) + " unknown to the denoiser");
  }
  return static_cast<std::size_t>(it - labels_.begin());
}

std::size_t TabularDenoiser::offset(int t, std::size_t position, int observed,
                                    std::size_t slot) const {
  if (t < 1 || t > T_) throw ArgumentError("step out of range for tabular denoiser");
  if (position >= positions_ || observed < 0 || observed > K_ || slot >= slots()) {
    throw ArgumentError("tabular denoiser index out of range");
  }
  std::size_t idx = static_cast<std::size_t>(t - 1);
  idx = idx * positions_ + position;
  idx = idx * static_cast<std::size_t>(K_ + 1) + static_cast<std::size_t>(observed);
  idx = idx * slots() + slot;
  return idx * static_cast<std::size_t>(K_);
}

std::span<double> TabularDenoiser::logits(int t, std::size_t position, int observed,
                                          std::size_t slot) {
  return {table_.data() + offset(t, position, observed, slot), static_cast<std::size_t>(K_)};
}

std::span<const double> TabularDenoiser::logits(int t, std::size_t position, int observed,
                                                std::size_t slot) const {
  return {table_.data() + offset(t, position, observed, slot), static_cast<std::size_t>(K_)};
}

Matrix TabularDenoiser::predict(const TokenGrid& x_t, int t, const Condition& cond) const {
  if (x_t.size() != positions_ || x_t.K != K_) {
    throw ArgumentError("x_t shape does not match the tabular denoiser");
  }
  // t = 0 never reaches a denoiser during sampling; treat it as the first step.
  const int step = std::max(t, 1);
  const std::size_t slot = slot_of(cond);
  Matrix out(positions_, K_);
  for (std::size_t i = 0; i < positions_; ++i) {
    const auto src = logits(step, i, x_t.tokens[i], slot);
    auto dst = out.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    softmax_inplace(dst);
  }
  return out;
}

}  // namespace tokdiff
