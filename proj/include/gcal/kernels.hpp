#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "gcal/matrix.hpp"

// Data-parallel distance kernels shared by selection, evaluation and the
// deviation statistic. gcal::kernels is the OpenMP build; gcal::kernels::serial
// is the single-threaded reference the tests and benchmarks compare against.
//
// Every kernel produces identical bits for any thread count: per-row results
// are written to their own slot and reductions are either exact (max/min) or
// summed serially in index order afterwards.

namespace gcal::kernels {

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

double squared_distance(std::span<const double> a, std::span<const double> b);
double distance(std::span<const double> a, std::span<const double> b);

/// min_dist[i] = min(min_dist[i], d(row i, row center)) for every row.
void update_min_dist(const Matrix& emb, std::size_t center, std::span<double> min_dist);

/// Index of the largest min_dist among rows with labeled[i] == 0; ties go to
/// the lowest index. npos when every row is labeled.
std::size_t argmax_unlabeled(std::span<const double> min_dist, std::span<const char> labeled);

/// max over rows of the distance to the nearest center.
double cover_radius(const Matrix& emb, std::span<const std::size_t> centers);

/// For each query row, the position in `refs` of its nearest reference row
/// (ties to the lowest position).
std::vector<std::size_t> nearest_reference(const Matrix& data, std::span<const std::size_t> refs,
                                           std::span<const std::size_t> queries);

/// Sum over unordered member pairs of the mean absolute coordinate difference.
double pairwise_abs_deviation_sum(const Matrix& data, std::span<const std::size_t> members);

/// Per-point silhouette values. labels must lie in 0..n_clusters-1.
std::vector<double> silhouette_values(const Matrix& emb, std::span<const int> labels, int n_clusters);

/// Nearest centroid per row (ties to the lowest centroid index).
std::vector<int> assign_nearest(const Matrix& data, const Matrix& centroids);

namespace serial {

void update_min_dist(const Matrix& emb, std::size_t center, std::span<double> min_dist);
std::size_t argmax_unlabeled(std::span<const double> min_dist, std::span<const char> labeled);
double cover_radius(const Matrix& emb, std::span<const std::size_t> centers);
std::vector<std::size_t> nearest_reference(const Matrix& data, std::span<const std::size_t> refs,
                                           std::span<const std::size_t> queries);
double pairwise_abs_deviation_sum(const Matrix& data, std::span<const std::size_t> members);
std::vector<double> silhouette_values(const Matrix& emb, std::span<const int> labels, int n_clusters);
std::vector<int> assign_nearest(const Matrix& data, const Matrix& centroids);

}  // namespace serial

}  // namespace gcal::kernels
