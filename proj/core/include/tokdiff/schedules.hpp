#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tokdiff {

// How a multi-codebook token grid is flattened into one sequence.
//   concatenated: all frames of codebook 0, then codebook 1, ...
//   interleaved:  codebook 0..N_q-1 of frame 0, then of frame 1, ...
enum class Layout { concatenated, interleaved };

std::string_view to_string(Layout layout);
Layout parse_layout(std::string_view name);

enum class ScheduleKind { linear, improved, custom };

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

// Mask-and-uniform noise schedule for one token stream.
//
// Cumulative coefficients are indexed by t in 0..T. `beta_bar` is the
// per-category uniform mass, so alpha_bar + K * beta_bar + gamma_bar = 1.
// Stepwise coefficients are indexed by t in 1..T; index 0 holds the identity
// step (alpha = 1, beta = gamma = 0).
struct ScheduleTable {
  int T = 0;
  int K = 0;
  std::vector<double> alpha_bar, beta_bar, gamma_bar;
  std::vector<double> alpha, beta, gamma;

  double uniform_mass(int t) const { return K * beta_bar[t]; }

  // Throws ScheduleError if any invariant is violated (simplex closure,
  // monotonicity, identity at t = 0, recurrence consistency).
  void validate() const;
};

// Linear schedule: alpha_bar falls from 1 to 0 while gamma_bar rises to 0.9
// and the total uniform mass K * beta_bar rises to 0.1.
ScheduleTable linear_schedule(int T, int K);

// Fills the stepwise coefficients from the cumulative ones. Steps past the
// point where alpha_bar reaches 0 get alpha = 0; steps past full masking get
// gamma = 1.
ScheduleTable stepwise_from_cumulative(ScheduleTable table);

// Builds a table from cumulative alpha_bar / gamma_bar sequences (beta_bar is
// implied by simplex closure) and derives the stepwise coefficients.
ScheduleTable schedule_from_cumulative(int K, std::vector<double> alpha_bar,
                                       std::vector<double> gamma_bar);

// Per-layer schedules for a token grid of n_q codebooks x frames.
struct PositionalScheduleTable {
  ScheduleKind kind = ScheduleKind::linear;
  int T = 0;
  int K = 0;
  int n_q = 1;
  int frames = 1;
  Layout layout = Layout::concatenated;
  std::vector<ScheduleTable> layers;

  std::size_t length() const { return static_cast<std::size_t>(n_q) * frames; }

  // Codebook layer that owns a flattened position.
  int layer_of(std::size_t position) const;

  const ScheduleTable& at_position(std::size_t position) const {
    return layers[layer_of(position)];
  }

  void validate() const;

  // Every layer shares one table.
  static PositionalScheduleTable uniform(const ScheduleTable& table, int n_q, int frames,
                                         Layout layout = Layout::concatenated);
};

// Per-codebook schedule that masks later codebooks earlier:
//   alpha_bar = 1 - t/T - exp(q / (2 N_q)) / (2T)
//   gamma_bar = t/T + exp(q / (2 N_q)) / (2T)
//   beta_bar  = 0
// where q is the codebook layer of the position. The t = 0 row is the
// identity; alpha_bar is clamped to [0, 1] and gamma_bar reset to
// 1 - alpha_bar - K * beta_bar so the simplex holds.
PositionalScheduleTable improved_schedule(int T, int K, int n_q, Layout layout, int frames);

}  // namespace tokdiff
