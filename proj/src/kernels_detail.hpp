#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "gcal/kernels.hpp"

// Per-element bodies shared by the OpenMP and serial kernels so both paths
// round identically.
namespace gcal::kernels::detail {

inline double nearest_center_distance(const Matrix& emb, std::size_t row,
                                      std::span<const std::size_t> centers) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c : centers) {
        best = std::min(best, distance(emb.row(row), emb.row(c)));
    }
    return best;
}

inline std::size_t nearest_of(const Matrix& data, std::size_t row, std::span<const std::size_t> refs) {
    std::size_t best = npos;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < refs.size(); ++r) {
        const double d = squared_distance(data.row(row), data.row(refs[r]));
        if (d < best_d || best == npos) {
            best_d = d;
            best = r;
        }
    }
    return best;
}

inline double abs_deviation_row_sum(const Matrix& data, std::span<const std::size_t> members,
                                    std::size_t a) {
    const auto ra = data.row(members[a]);
    const double inv_dim = 1.0 / static_cast<double>(data.cols());
    double sum = 0.0;
    for (std::size_t b = a + 1; b < members.size(); ++b) {
        const auto rb = data.row(members[b]);
        double s = 0.0;
        for (std::size_t k = 0; k < ra.size(); ++k) {
            s += std::abs(ra[k] - rb[k]);
        }
        sum += s * inv_dim;
    }
    return sum;
}

inline double silhouette_of(const Matrix& emb, std::span<const int> labels,
                            std::span<const std::size_t> cluster_sizes, std::size_t i,
                            std::vector<double>& scratch) {
    const int own = labels[i];
    if (cluster_sizes[own] <= 1) {
        return 0.0;
    }
    std::fill(scratch.begin(), scratch.end(), 0.0);
    for (std::size_t j = 0; j < emb.rows(); ++j) {
        if (j != i) {
            scratch[labels[j]] += distance(emb.row(i), emb.row(j));
        }
    }
    const double a = scratch[own] / static_cast<double>(cluster_sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < scratch.size(); ++c) {
        if (static_cast<int>(c) != own && cluster_sizes[c] > 0) {
            b = std::min(b, scratch[c] / static_cast<double>(cluster_sizes[c]));
        }
    }
    const double denom = std::max(a, b);
    // 0/0 (all points coincide) is defined as 0.
    return denom > 0.0 ? (b - a) / denom : 0.0;
}

inline int nearest_centroid(const Matrix& data, const Matrix& centroids, std::size_t row) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        const double d = squared_distance(data.row(row), centroids.row(c));
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

inline std::vector<std::size_t> cluster_sizes(std::span<const int> labels, int n_clusters) {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(n_clusters), 0);
    for (int l : labels) {
        ++sizes[static_cast<std::size_t>(l)];
    }
    return sizes;
}

}  // namespace gcal::kernels::detail
