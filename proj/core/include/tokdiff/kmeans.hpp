#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tokdiff/matrix.hpp"
#include "tokdiff/random.hpp"

namespace tokdiff {

// Index of the nearest codebook row in squared L2; ties go to the lowest
// index. Writes the squared distance to *dist when given.
int nearest_code(const Matrix& codebook, std::span<const double> x, double* dist = nullptr);

double squared_distance(std::span<const double> a, std::span<const double> b);

std::size_t count_distinct_rows(const Matrix& points);

struct KMeansResult {
  Matrix centroids;
  std::vector<int> assignment;
  // Inertia (sum of squared distances to the assigned centroid) after every
  // assignment step, the last entry belonging to the returned centroids.
  std::vector<double> inertia_trace;
};

// Lloyd's algorithm with k-means++ seeding. A cluster that empties is
// re-seeded at the point currently farthest from its centroid. Throws
// FittingError when there are fewer than k distinct points.
KMeansResult kmeans(const Matrix& points, int k, int max_iters, Rng& rng);

}  // namespace tokdiff
