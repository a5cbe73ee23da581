#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tokdiff/codec.hpp"
#include "tokdiff/denoiser.hpp"
#include "tokdiff/matrix.hpp"
#include "tokdiff/metrics.hpp"
#include "tokdiff/schedules.hpp"
#include "tokdiff/training.hpp"

namespace tokdiff::io {

// Malformed input files.
class FormatError : public Error {
 public:
  using Error::Error;
};

std::string read_text(const std::string& path);

// Writes through a temporary sibling and renames it into place, so a failed
// write never leaves a partial or modified file behind.
void write_text_atomic(const std::string& path, std::string_view content);

// Schedule files:
//   {"T", "K", "kind", "N_q", "layout", "L", "alpha_bar", "gamma_bar", "beta_bar"}
// The coefficient arrays are flat (T + 1 entries) when every layer shares one
// table and nested [N_q][T + 1] otherwise. When the arrays are absent the
// table is rebuilt from kind, T, K, N_q, layout and L.
std::string schedule_to_json(const PositionalScheduleTable& schedule);
PositionalScheduleTable schedule_from_json(std::string_view text);

// Token files: {"K", "N_q", "L", "layout", "grids": [[[int]]], "labels": [int|null]}
// with grids[g][q][l] = token of codebook q at frame l.
struct TokenFile {
  int K = 0;
  int n_q = 1;
  int frames = 0;
  Layout layout = Layout::concatenated;
  std::vector<LabeledGrid> grids;
};
std::string tokens_to_json(const TokenFile& file);
TokenFile tokens_from_json(std::string_view text);
TokenFile make_token_file(const std::vector<TokenGrid>& grids, const Condition& cond = {});

// Denoiser files carry the schedule they were built for:
//   {"kind": "tabular", "T", "K", "positions", "labels", "logits", "schedule"}
//   {"kind": "bayes", "support": [{"grid", "prob", "label"}], "schedule"}
struct DenoiserFile {
  std::unique_ptr<Denoiser> denoiser;
  PositionalScheduleTable schedule;
};
std::string tabular_to_json(const TabularDenoiser& model, const PositionalScheduleTable& schedule);
std::string bayes_to_json(const BayesOracleDenoiser& model);
DenoiserFile denoiser_from_json(std::string_view text);

// Codec files: {"kind", "G", "R", "Kp", "codebooks": [[[float]]]}
std::string codec_to_json(const CodecModel& model);
CodecModel codec_from_json(std::string_view text);

// Numeric CSV, one row per line. A first line with non-numeric fields is
// treated as a header and skipped.
Matrix matrix_from_csv(std::string_view text);
std::string matrix_to_csv(const Matrix& m);

// Pitch CSV with columns frame,f0,voiced.
PitchTrack pitch_from_csv(std::string_view text);

}  // namespace tokdiff::io
