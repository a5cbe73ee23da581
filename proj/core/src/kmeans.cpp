#include "tokdiff/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "tokdiff/errors.hpp"

namespace tokdiff {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

int nearest_code(const Matrix& codebook, std::span<const double> x, double* dist) {
  if (codebook.rows() == 0) throw ArgumentError("empty codebook");
  if (codebook.cols() != x.size()) throw ArgumentError("vector and codebook differ in dimension");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < codebook.rows(); ++k) {
    const double d = squared_distance(codebook.row(k), x);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

std::size_t count_distinct_rows(const Matrix& points) {
  std::vector<std::size_t> idx(points.rows());
  std::iota(idx.begin(), idx.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    const auto ra = points.row(a);
    const auto rb = points.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  };
  std::sort(idx.begin(), idx.end(), less);
  std::size_t distinct = idx.empty() ? 0 : 1;
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (less(idx[i - 1], idx[i])) ++distinct;
  }
  return distinct;
}

namespace {

Matrix seed_plus_plus(const Matrix& points, int k, Rng& rng) {
  const std::size_t n = points.rows();
  Matrix centroids(k, points.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());

  std::size_t pick = rng.below(n);
  for (int c = 0; c < k; ++c) {
    std::copy(points.row(pick).begin(), points.row(pick).end(), centroids.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points.row(i), centroids.row(c)));
    }
    if (c + 1 < k) pick = rng.categorical(d2);
  }
  return centroids;
}

double assign(const Matrix& points, const Matrix& centroids, std::vector<int>& assignment,
              std::vector<double>& dist) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    assignment[i] = nearest_code(centroids, points.row(i), &dist[i]);
    inertia += dist[i];
  }
  return inertia;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int k, int max_iters, Rng& rng) {
  if (k < 1) throw ArgumentError("kmeans needs k >= 1");
  if (max_iters < 1) throw ArgumentError("kmeans needs at least one iteration");
  if (points.rows() == 0 || points.cols() == 0) throw ArgumentError("kmeans needs data");
  const std::size_t distinct = count_distinct_rows(points);
  if (distinct < static_cast<std::size_t>(k)) {
    throw FittingError("only " + std::to_string(distinct) + " distinct points for " +
                       std::to_string(k) + " clusters");
  }

  const std::size_t n = points.rows();
  const std::size_t dim = points.cols();
  KMeansResult result;
  result.centroids = seed_plus_plus(points, k, rng);
  result.assignment.assign(n, -1);
  std::vector<double> dist(n, 0.0);
  std::vector<int> previous;

  for (int iter = 0; iter < max_iters; ++iter) {
    previous = result.assignment;
    result.inertia_trace.push_back(assign(points, result.centroids, result.assignment, dist));
    if (iter > 0 && previous == result.assignment) return result;

    Matrix sums(k, dim);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int c = result.assignment[i];
      ++counts[c];
      auto dst = sums.row(c);
      const auto src = points.row(i);
      for (std::size_t j = 0; j < dim; ++j) dst[j] += src[j];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        const auto far = static_cast<std::size_t>(
            std::max_element(dist.begin(), dist.end()) - dist.begin());
        std::copy(points.row(far).begin(), points.row(far).end(), result.centroids.row(c).begin());
        dist[far] = 0.0;
        continue;
      }
      auto dst = result.centroids.row(c);
      const auto src = sums.row(c);
      for (std::size_t j = 0; j < dim; ++j) dst[j] = src[j] / static_cast<double>(counts[c]);
    }
  }
  result.inertia_trace.push_back(assign(points, result.centroids, result.assignment, dist));
  return result;
}

}  // namespace tokdiff
