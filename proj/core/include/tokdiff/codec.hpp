#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tokdiff/matrix.hpp"
#include "tokdiff/token_grid.hpp"

namespace tokdiff {

enum class QuantizerKind { vq, rvq, gvq, grvq };

std::string_view to_string(QuantizerKind kind);
QuantizerKind parse_quantizer_kind(std::string_view name);

// Ordered codebooks of a (group-)(residual) vector quantizer.
//
// A frame of dimension `dim` is split into `groups` contiguous sub-vectors of
// dim / groups entries; each group is quantized by `depth` residual books.
// VQ is (1, 1), RVQ is (1, R), GVQ is (G, 1), GRVQ is (G, R). Book
// b = layer * groups + group, so earlier books always carry coarser residual
// layers.
struct CodecModel {
  QuantizerKind kind = QuantizerKind::vq;
  int groups = 1;
  int depth = 1;
  int codes = 0;
  int dim = 0;
  std::vector<Matrix> codebooks;  // each codes x (dim / groups)

  int n_books() const { return groups * depth; }
  int sub_dim() const { return dim / groups; }
  int book_index(int group, int layer) const { return layer * groups + group; }
  bool residual() const { return kind == QuantizerKind::rvq || kind == QuantizerKind::grvq; }

  void validate() const;
};

// L frames x d features.
using FeatureMatrix = Matrix;

struct QuantizeResult {
  TokenGrid tokens;      // active_books x L, concatenated layout, K = codes
  Matrix reconstruction;  // L x d
};

// Nearest-code quantization of every frame. `active_books` = 0 means all
// books; residual kinds accept any prefix 1..N_q, flat kinds require all.
QuantizeResult quantize(const FeatureMatrix& features, const CodecModel& model, int active_books = 0);

// Sum (within a group) and concatenation (across groups) of the selected code
// vectors. Accepts grids with fewer rows than the model has books.
FeatureMatrix dequantize(const TokenGrid& tokens, const CodecModel& model);

struct FitConfig {
  QuantizerKind kind = QuantizerKind::vq;
  int groups = 1;
  int depth = 1;
  int codes = 16;
  int iters = 25;
  std::uint64_t seed = 0;
  // Residual kinds only: each frame draws a depth uniformly from 1..R and
  // only contributes to fitting the books within that depth.
  bool dropout = false;
};

struct FitReport {
  CodecModel model;
  std::vector<std::vector<double>> inertia_traces;  // one per book, in book order
};

// k-means per book; residual books are fitted in order on the residual left
// by the earlier books.
FitReport fit_codebooks_report(const FeatureMatrix& features, const FitConfig& config);
CodecModel fit_codebooks(const FeatureMatrix& features, const FitConfig& config);

struct DepthMse {
  int depth = 0;
  double mse = 0.0;
};

// Mean squared reconstruction error per element for every active depth
// (1..N_q for residual kinds, N_q only for flat kinds).
std::vector<DepthMse> reconstruction_report(const FeatureMatrix& features, const CodecModel& model);

double mean_squared_error(const Matrix& a, const Matrix& b);

// Named configurations: "mel-vq" (512 codes), "rvq" (12 books), "gvq" (4
// groups), "grvq" (2 groups x 2 layers), all but mel-vq with 1024 codes.
FitConfig codec_preset(std::string_view name);

// Codebooks drawn from a standard normal; for sizing, benchmarks and tests.
CodecModel random_codec(const FitConfig& config, int dim, std::uint64_t seed);

}  // namespace tokdiff
