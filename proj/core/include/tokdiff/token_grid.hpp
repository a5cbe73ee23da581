#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "tokdiff/schedules.hpp"

namespace tokdiff {

// N_q codebooks x L frames of tokens in {0..K}; K is the mask id. Tokens are
// stored flattened in the order given by `layout`, so tokens[i] is sequence
// position i.
struct TokenGrid {
  int K = 0;
  int n_q = 1;
  int frames = 0;
  Layout layout = Layout::concatenated;
  std::vector<int> tokens;

  TokenGrid() = default;
  TokenGrid(int K, int n_q, int frames, Layout layout = Layout::concatenated, int fill = 0);

  int mask_id() const { return K; }
  std::size_t size() const { return tokens.size(); }

  std::size_t position(int layer, int frame) const;
  int at(int layer, int frame) const { return tokens[position(layer, frame)]; }
  int& at(int layer, int frame) { return tokens[position(layer, frame)]; }

  bool has_mask() const;
  bool same_shape(const TokenGrid& other) const;

  // Throws ArgumentError on out-of-range tokens, wrong length, or (when
  // allow_mask is false) any mask token.
  void validate(bool allow_mask) const;

  bool operator==(const TokenGrid&) const = default;
};

// Conditioning label; an empty label is the null (unconditional) condition.
struct Condition {
  std::optional<int> label;

  static Condition null() { return {}; }
  static Condition of(int label) { return {label}; }
  bool is_null() const { return !label.has_value(); }

  bool operator==(const Condition&) const = default;
};

}  // namespace tokdiff
