#include "tokdiff/auxiliary.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "tokdiff/errors.hpp"

namespace tokdiff {

namespace {

void require_square(const SimilarityMatrix& sim) {
  if (sim.rows() == 0 || sim.rows() != sim.cols()) {
    throw ArgumentError("similarity matrix must be square and nonempty");
  }
  for (double v : sim.data()) {
    if (!std::isfinite(v)) throw ArgumentError("similarity matrix has a non-finite entry");
  }
}

}  // namespace

double info_nce(const SimilarityMatrix& sim, double temperature) {
  if (!(temperature > 0.0)) throw ArgumentError("InfoNCE temperature must be > 0");
  require_square(sim);
  const std::size_t n = sim.rows();

  auto direction = [&](bool by_row) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double hi = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        hi = std::max(hi, (by_row ? sim(i, j) : sim(j, i)) / temperature);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        z += std::exp((by_row ? sim(i, j) : sim(j, i)) / temperature - hi);
      }
      total += hi + std::log(z) - sim(i, i) / temperature;
    }
    return total / static_cast<double>(n);
  };
  return 0.5 * (direction(true) + direction(false));
}

double contrastive_ranking_loss(const SimilarityMatrix& sim, double margin) {
  if (!(margin >= 0.0)) throw ArgumentError("ranking margin must be >= 0");
  require_square(sim);
  const std::size_t n = sim.rows();
  if (n < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      total += std::max(0.0, margin - sim(i, i) + sim(i, j));
      total += std::max(0.0, margin - sim(j, j) + sim(i, j));
    }
  }
  return total / static_cast<double>(n * (n - 1));
}

double recall_at_k(const SimilarityMatrix& sim, int k) {
  require_square(sim);
  const std::size_t n = sim.rows();
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw ArgumentError("recall@k needs 1 <= k <= N");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (sim(i, j) > sim(i, i) || (sim(i, j) == sim(i, i) && j < i)) ++ahead;
    }
    if (ahead < static_cast<std::size_t>(k)) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

ClubEstimate club_mi(const PairedSamples& samples) {
  const std::size_t n = samples.x.rows();
  const std::size_t dx = samples.x.cols();
  const std::size_t dy = samples.y.cols();
  if (samples.y.rows() != n) throw ArgumentError("CLUB: x and y have different sample counts");
  if (dx == 0 || dy == 0) throw ArgumentError("CLUB: empty dimensions");
  if (n < 10 * (dx + 1)) {
    throw ArgumentError("CLUB needs at least 10 (dim_x + 1) = " + std::to_string(10 * (dx + 1)) +
                        " samples, got " + std::to_string(n));
  }

  using Eigen::MatrixXd;
  MatrixXd design(n, dx + 1);
  MatrixXd target(n, dy);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dx; ++j) design(i, j) = samples.x(i, j);
    design(i, dx) = 1.0;
    for (std::size_t j = 0; j < dy; ++j) target(i, j) = samples.y(i, j);
  }
  const MatrixXd coef = design.colPivHouseholderQr().solve(target);
  const MatrixXd mean = design * coef;
  const MatrixXd resid = target - mean;

  ClubEstimate est;
  const double nn = static_cast<double>(n);
  double positive = 0.0;
  double negative = 0.0;
  for (std::size_t d = 0; d < dy; ++d) {
    double var = resid.col(d).squaredNorm() / nn;
    if (var < kClubVarianceFloor) {
      var = kClubVarianceFloor;
      est.variance_floored = true;
    }
    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * var);
    // (1 / n^2) sum_i sum_j (y_j - mu_i)^2 expanded into first and second moments.
    const double y_mean = target.col(d).mean();
    const double y_sq = target.col(d).squaredNorm() / nn;
    const double mu_mean = mean.col(d).mean();
    const double mu_sq = mean.col(d).squaredNorm() / nn;
    const double cross = y_sq - 2.0 * y_mean * mu_mean + mu_sq;
    const double matched = resid.col(d).squaredNorm() / nn;
    positive += log_norm - matched / (2.0 * var);
    negative += log_norm - cross / (2.0 * var);
  }
  est.log_likelihood = positive;
  est.value = positive - negative;
  if (est.variance_floored) {
    est.diagnostic = "residual variance fell below the 1e-8 floor; y is (near-)deterministic in x "
                     "and the estimate is inflated";
  }
  return est;
}

double embedding_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() == 0) {
    throw ArgumentError("embedding_distance: shape mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    total += d * d;
  }
  return total / static_cast<double>(a.rows());
}

double combined_objective(const ObjectiveTerms& terms, const ObjectiveWeights& weights) {
  return terms.diffusion + weights.content_mi * terms.content_mi +
         weights.speaker_mi * terms.speaker_mi + weights.embedding * terms.embedding -
         weights.content_fit * terms.content_fit - weights.speaker_fit * terms.speaker_fit;
}

}  // namespace tokdiff
