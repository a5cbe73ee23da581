#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tokdiff/matrix.hpp"
#include "tokdiff/schedules.hpp"
#include "tokdiff/token_grid.hpp"

namespace tokdiff {

// Predicts p(x0~ | x_t, t, cond) for every sequence position. The result is an
// N x K matrix whose row i is a distribution over clean tokens 0..K-1 (the
// mask is never a target).
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual int K() const = 0;
  virtual Matrix predict(const TokenGrid& x_t, int t, const Condition& cond) const = 0;
};

// One point of an explicitly enumerated data distribution.
struct SupportPoint {
  TokenGrid grid;
  double prob = 0.0;
  Condition cond;
};

// Exact posterior over x0 by enumerating a finite data distribution:
//   p(x0~[i] = v | x_t) = sum_{x0: x0[i] = v} q(x_t | x0) p(x0) / sum_{x0} q(x_t | x0) p(x0).
// A labelled query restricts the support to points with that label; the
// null condition uses every point.
class BayesOracleDenoiser final : public Denoiser {
 public:
  static constexpr std::size_t kMaxSupport = 10000;

  BayesOracleDenoiser(std::vector<SupportPoint> support, PositionalScheduleTable schedule);

  int K() const override { return schedule_.K; }
  Matrix predict(const TokenGrid& x_t, int t, const Condition& cond) const override;

  const std::vector<SupportPoint>& support() const { return support_; }
  const PositionalScheduleTable& schedule() const { return schedule_; }

 private:
  std::vector<SupportPoint> support_;
  PositionalScheduleTable schedule_;
};

inline BayesOracleDenoiser bayes_oracle_denoiser(std::vector<SupportPoint> support,
                                                 PositionalScheduleTable schedule) {
  return BayesOracleDenoiser(std::move(support), std::move(schedule));
}

// Softmax table p(x0~[i] | t, i, x_t[i], cond): one logit row of length K per
// (step, position, observed token, label slot). The last label slot is the
// null condition.
class TabularDenoiser final : public Denoiser {
 public:
  TabularDenoiser(int T, int K, std::size_t positions, std::vector<int> labels);

  int K() const override { return K_; }
  Matrix predict(const TokenGrid& x_t, int t, const Condition& cond) const override;

  int steps() const { return T_; }
  std::size_t positions() const { return positions_; }
  const std::vector<int>& labels() const { return labels_; }
  std::size_t slots() const { return labels_.size() + 1; }

  // Slot of a condition; throws ArgumentError for labels never seen in training.
  std::size_t slot_of(const Condition& cond) const;

  std::span<double> logits(int t, std::size_t position, int observed, std::size_t slot);
  std::span<const double> logits(int t, std::size_t position, int observed,
                                 std::size_t slot) const;

  const std::vector<double>& table() const { return table_; }
  std::vector<double>& table() { return table_; }

  static constexpr std::size_t kMaxEntries = 50'000'000;

 private:
  std::size_t offset(int t, std::size_t position, int observed, std::size_t slot) const;

  int T_;
  int K_;
  std::size_t positions_;
  std::vector<int> labels_;
  std::vector<double> table_;
};

void softmax_inplace(std::span<double> values);

}  // namespace tokdiff
