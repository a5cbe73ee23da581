#include "tokdiff/token_grid.hpp"

#include <algorithm>
#include <string>

#include "tokdiff/errors.hpp"

namespace tokdiff {

TokenGrid::TokenGrid(int K, int n_q, int frames, Layout layout, int fill)
    : K(K), n_q(n_q), frames(frames), layout(layout) {
  if (K < 2 || n_q < 1 || frames < 1) {
    throw ArgumentError("token grid needs K >= 2, N_q >= 1, L >= 1");
  }
  tokens.assign(static_cast<std::size_t>(n_q) * frames, fill);
}

std::size_t TokenGrid::position(int layer, int frame) const {
  if (layer < 0 || layer >= n_q || frame < 0 || frame >= frames) {
    throw ArgumentError("grid index out of range");
  }
  if (layout == Layout::concatenated) return static_cast<std::size_t>(layer) * frames + frame;
  return static_cast<std::size_t>(frame) * n_q + layer;
}

bool TokenGrid::has_mask() const {
  return std::find(tokens.begin(), tokens.end(), K) != tokens.end();
}

bool TokenGrid::same_shape(const TokenGrid& other) const {
  return K == other.K && n_q == other.n_q && frames == other.frames && layout == other.layout;
}

void TokenGrid::validate(bool allow_mask) const {
  if (tokens.size() != static_cast<std::size_t>(n_q) * frames) {
    throw ArgumentError("token grid length does not match N_q * L");
  }
  const int upper = allow_mask ? K : K - 1;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || tokens[i] > upper) {
      throw ArgumentError(tokens[i] == K ? "mask token in clean grid at position " + std::to_string(i)
                                         : "token out of range at position " + std::to_string(i));
    }
  }
}

}  // namespace tokdiff
