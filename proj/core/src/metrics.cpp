#include "tokdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tokdiff/errors.hpp"

namespace tokdiff {

double mcd(const CepstraSequence& ref, const CepstraSequence& syn, const McdOptions& options) {
  if (ref.rows() != syn.rows() || ref.cols() != syn.cols()) {
    throw ArgumentError("mcd: reference and synthesized cepstra differ in shape");
  }
  if (ref.rows() == 0 || ref.cols() == 0) throw ArgumentError("mcd: empty input");
  if (options.order < 1) throw ArgumentError("mcd: order must be >= 1");
  const std::size_t m = std::min(ref.cols(), static_cast<std::size_t>(options.order));

  double total = 0.0;
  for (std::size_t t = 0; t < ref.rows(); ++t) {
    double sq = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const double d = ref(t, c) - syn(t, c);
      sq += d * d;
    }
    total += std::sqrt(sq);
  }
  double value = total / static_cast<double>(ref.rows());
  if (options.db_scale) value *= 10.0 * std::numbers::sqrt2 / std::numbers::ln10;
  return value;
}

double ssim(const Matrix& a, const Matrix& b, const SsimOptions& options) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError("ssim: inputs differ in shape");
  }
  const int w = options.window;
  if (w < 1 || static_cast<std::size_t>(w) > a.rows() || static_cast<std::size_t>(w) > a.cols()) {
    throw ArgumentError("ssim: window must be between 1 and both matrix dimensions");
  }
  double range = 0.0;
  if (!options.c1 || !options.c2) {
    const auto [lo, hi] = std::minmax_element(a.data().begin(), a.data().end());
    range = *hi - *lo;
    if (range <= 0.0) range = 1.0;
  }
  const double c1 = options.c1.value_or((0.01 * range) * (0.01 * range));
  const double c2 = options.c2.value_or((0.03 * range) * (0.03 * range));

  const std::size_t rows = a.rows() - w + 1;
  const std::size_t cols = a.cols() - w + 1;
  const double n = static_cast<double>(w) * w;
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < w; ++i) {
        for (int j = 0; j < w; ++j) {
          const double x = a(r + i, c + j);
          const double y = b(r + i, c + j);
          sa += x;
          sb += y;
          saa += x * x;
          sbb += y * y;
          sab += x * y;
        }
      }
      const double ma = sa / n;
      const double mb = sb / n;
      const double va = std::max(0.0, saa / n - ma * ma);
      const double vb = std::max(0.0, sbb / n - mb * mb);
      const double cov = sab / n - ma * mb;
      const double num = (2 * ma * mb + c1) * (2 * cov + c2);
      const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
      // Only identical all-zero patches with zero constants reach den == 0.
      total += den == 0.0 ? 1.0 : num / den;
    }
  }
  return total / static_cast<double>(rows * cols);
}

void PitchTrack::validate() const {
  if (f0.size() != voiced.size()) throw ArgumentError("pitch track: f0 and voicing differ in length");
  for (std::size_t i = 0; i < f0.size(); ++i) {
    if (!(f0[i] >= 0.0)) throw ArgumentError("pitch track: negative F0 at frame " + std::to_string(i));
    if (voiced[i] && !(f0[i] > 0.0)) {
      throw ArgumentError("pitch track: voiced frame " + std::to_string(i) + " has F0 = 0");
    }
  }
}

PitchErrors pitch_errors(const PitchTrack& ref, const PitchTrack& syn, double gpe_threshold) {
  ref.validate();
  syn.validate();
  if (ref.size() != syn.size()) throw ArgumentError("pitch tracks differ in length");
  if (ref.size() == 0) throw ArgumentError("pitch tracks are empty");
  if (!(gpe_threshold > 0.0)) throw ArgumentError("GPE threshold must be > 0");

  PitchErrors e;
  e.frames = ref.size();
  for (std::size_t i = 0; i < e.frames; ++i) {
    if (ref.voiced[i] != syn.voiced[i]) {
      ++e.voicing_errors;
      continue;
    }
    if (!ref.voiced[i]) continue;
    ++e.both_voiced;
    if (std::abs(syn.f0[i] - ref.f0[i]) / ref.f0[i] > gpe_threshold) ++e.gross_errors;
  }
  const auto n = static_cast<double>(e.frames);
  e.vde = static_cast<double>(e.voicing_errors) / n;
  e.ffe = static_cast<double>(e.gross_errors + e.voicing_errors) / n;
  if (e.both_voiced > 0) {
    e.gpe = static_cast<double>(e.gross_errors) / static_cast<double>(e.both_voiced);
  }
  return e;
}

}  // namespace tokdiff
