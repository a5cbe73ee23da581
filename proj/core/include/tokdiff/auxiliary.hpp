#pragma once

#include <string>

#include "tokdiff/matrix.hpp"

namespace tokdiff {

// Square score matrix; row i scores query i against every candidate and the
// diagonal holds the matched pairs.
using SimilarityMatrix = Matrix;

// Symmetric InfoNCE: the mean over rows of -log softmax(sim / tau)[i][i] and
// the same over columns, averaged.
double info_nce(const SimilarityMatrix& sim, double temperature);

// Bidirectional hinge averaged over off-diagonal pairs (i, j):
//   max(0, m - s_ii + s_ij) + max(0, m - s_jj + s_ij).
double contrastive_ranking_loss(const SimilarityMatrix& sim, double margin);

// Percentage of rows whose diagonal entry ranks in the top k of its row.
// Equal scores rank by candidate index.
double recall_at_k(const SimilarityMatrix& sim, int k);

// Aligned samples (x_i, y_i), one per row.
struct PairedSamples {
  Matrix x;
  Matrix y;
};

struct ClubEstimate {
  double value = 0.0;           // nats
  double log_likelihood = 0.0;  // mean log q(y_i | x_i) of the fitted conditional
  bool variance_floored = false;
  std::string diagnostic;
};

inline constexpr double kClubVarianceFloor = 1e-8;

// Contrastive log-ratio upper bound with a linear-Gaussian conditional
// q(y | x) = N(W x + b, diag(s^2)) fitted by least squares:
//   mean_i log q(y_i | x_i) - (1 / n^2) sum_i sum_j log q(y_j | x_i).
// Requires n >= 10 (dim_x + 1).
ClubEstimate club_mi(const PairedSamples& samples);

// Mean squared Euclidean distance between matched rows.
double embedding_distance(const Matrix& a, const Matrix& b);

// Weights of the combined training objective. None has a published value,
// so all default to 1.
struct ObjectiveWeights {
  double content_mi = 1.0;       // on I(z_e; c)
  double speaker_mi = 1.0;       // on I(z_e; z_sid)
  double embedding = 1.0;        // on D_Euc(z_p, z_e)
  double content_fit = 1.0;      // on the content q log-likelihood
  double speaker_fit = 1.0;      // on the speaker q log-likelihood
};

struct ObjectiveTerms {
  double diffusion = 0.0;
  double content_mi = 0.0;
  double speaker_mi = 0.0;
  double embedding = 0.0;
  double content_fit = 0.0;
  double speaker_fit = 0.0;
};

// L = L_diff + w1 I(z_e; c) + w2 I(z_e; z_sid) + w3 D_Euc(z_p, z_e)
//     - b1 F_content - b2 F_speaker
// (the variance-adaptor loss is not modelled).
double combined_objective(const ObjectiveTerms& terms, const ObjectiveWeights& weights = {});

}  // namespace tokdiff
