#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "tokdiff/matrix.hpp"

namespace tokdiff {

// Frames x cepstral coefficients (c_1..c_M per row).
using CepstraSequence = Matrix;

struct McdOptions {
  // Number of leading coefficients compared; rows with fewer columns use all.
  int order = 24;
  // Multiply by 10 sqrt(2) / ln 10 (the dB convention of most MCD tools).
  bool db_scale = false;
};

// (1 / T) sum_t sqrt(sum_m (c_{m,t} - c^_{m,t})^2) over frame-aligned inputs.
double mcd(const CepstraSequence& ref, const CepstraSequence& syn, const McdOptions& options = {});

struct SsimOptions {
  int window = 7;
  // Defaults (0.01 L)^2 and (0.03 L)^2, L = max - min of the reference
  // (L = 1 when the reference is constant).
  std::optional<double> c1;
  std::optional<double> c2;
};

// Mean local SSIM over every window x window patch (stride 1, uniform
// weights, population moments).
double ssim(const Matrix& a, const Matrix& b, const SsimOptions& options = {});

struct PitchTrack {
  std::vector<double> f0;  // Hz
  std::vector<bool> voiced;

  std::size_t size() const { return f0.size(); }
  void validate() const;
};

struct PitchErrors {
  std::optional<double> gpe;  // empty when no frame is voiced in both tracks
  double vde = 0.0;
  double ffe = 0.0;
  std::size_t frames = 0;
  std::size_t both_voiced = 0;
  std::size_t gross_errors = 0;
  std::size_t voicing_errors = 0;
};

// VDE: voicing mismatch rate. GPE: share of both-voiced frames whose
// relative F0 deviation exceeds the threshold. FFE: (gross + voicing
// errors) / frames.
PitchErrors pitch_errors(const PitchTrack& ref, const PitchTrack& syn, double gpe_threshold = 0.2);

}  // namespace tokdiff
