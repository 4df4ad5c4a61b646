#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gcal/matrix.hpp"

namespace gcal {

/// Euclidean distance between two embedding rows. Throws std::out_of_range.
double d_phi(const Matrix& emb, std::size_t i, std::size_t j);

struct TraceEntry {
    std::size_t index = 0;
    double min_dist = 0.0;  // +inf for a cold-start pick
};

/// Labeled set and per-row distance to the nearest labeled row.
struct SelectionState {
    std::vector<std::size_t> labeled;
    std::vector<char> is_labeled;
    std::vector<double> min_dist;  // +inf while nothing is labeled
    std::vector<TraceEntry> trace;

    static SelectionState start(const Matrix& emb, std::span<const std::size_t> initial);
    void add(const Matrix& emb, std::size_t row);
};

/// Adds k farthest-first picks to `state`. An empty labeled set starts with
/// `cold_start` (default row 0). Ties resolve to the lowest row index.
/// Throws std::invalid_argument when k exceeds the unlabeled count.
void extend_k_center(const Matrix& emb, SelectionState& state, std::size_t k,
                     std::optional<std::size_t> cold_start = std::nullopt);

SelectionState k_center_greedy(const Matrix& emb, std::span<const std::size_t> initial, std::size_t k,
                               std::optional<std::size_t> cold_start = std::nullopt);

struct KCenterSolution {
    double radius = 0.0;
    std::vector<std::size_t> centers;  // the k added rows, ascending
};

/// Exhaustive k-center over all k-subsets of unlabeled rows (first optimum in
/// lexicographic order). Throws std::invalid_argument above 1e6 subsets.
KCenterSolution brute_force_k_center(const Matrix& emb, std::span<const std::size_t> initial, std::size_t k);

/// max_i min_{j in labeled} d(i, j). Throws std::invalid_argument on an empty set.
double cover_radius(const Matrix& emb, std::span<const std::size_t> labeled);

/// Mean silhouette under Euclidean distance; singleton clusters score 0 and
/// a 0/0 ratio is 0. Throws std::invalid_argument for fewer than 2 clusters.
double silhouette_score(const Matrix& emb, std::span<const int> cluster_labels);

/// Lloyd's k-means with k-means++ seeding; returns labels in 0..k-1.
std::vector<int> kmeans(const Matrix& data, std::size_t k, std::uint64_t seed, int max_iter = 100);

}  // namespace gcal
