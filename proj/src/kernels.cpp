#include "gcal/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

#include "kernels_detail.hpp"

namespace gcal::kernels {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

double distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

void update_min_dist(const Matrix& emb, std::size_t center, std::span<double> min_dist) {
    const auto n = static_cast<std::ptrdiff_t>(emb.rows());
    const auto c = emb.row(center);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double d = distance(emb.row(static_cast<std::size_t>(i)), c);
        if (d < min_dist[i]) {
            min_dist[i] = d;
        }
    }
}

std::size_t argmax_unlabeled(std::span<const double> min_dist, std::span<const char> labeled) {
    const auto n = static_cast<std::ptrdiff_t>(min_dist.size());
    std::size_t best = npos;
    double best_v = -1.0;
#pragma omp parallel
    {
        std::size_t local = npos;
        double local_v = -1.0;
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            if (!labeled[i] && (local == npos || min_dist[i] > local_v)) {
                local = static_cast<std::size_t>(i);
                local_v = min_dist[i];
            }
        }
#pragma omp critical(gcal_argmax)
        {
            if (local != npos &&
                (best == npos || local_v > best_v || (local_v == best_v && local < best))) {
                best = local;
                best_v = local_v;
            }
        }
    }
    return best;
}

double cover_radius(const Matrix& emb, std::span<const std::size_t> centers) {
    const auto n = static_cast<std::ptrdiff_t>(emb.rows());
    double radius = 0.0;
#pragma omp parallel for schedule(static) reduction(max : radius)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        radius = std::max(radius, detail::nearest_center_distance(emb, static_cast<std::size_t>(i), centers));
    }
    return radius;
}

std::vector<std::size_t> nearest_reference(const Matrix& data, std::span<const std::size_t> refs,
                                           std::span<const std::size_t> queries) {
    std::vector<std::size_t> out(queries.size(), npos);
    const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t q = 0; q < n; ++q) {
        out[q] = detail::nearest_of(data, queries[q], refs);
    }
    return out;
}

double pairwise_abs_deviation_sum(const Matrix& data, std::span<const std::size_t> members) {
    std::vector<double> partial(members.size(), 0.0);
    const auto n = static_cast<std::ptrdiff_t>(members.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t a = 0; a < n; ++a) {
        partial[a] = detail::abs_deviation_row_sum(data, members, static_cast<std::size_t>(a));
    }
    double total = 0.0;
    for (double p : partial) {
        total += p;
    }
    return total;
}

std::vector<double> silhouette_values(const Matrix& emb, std::span<const int> labels, int n_clusters) {
    const auto sizes = detail::cluster_sizes(labels, n_clusters);
    std::vector<double> out(emb.rows(), 0.0);
    const auto n = static_cast<std::ptrdiff_t>(emb.rows());
#pragma omp parallel
    {
        std::vector<double> scratch(static_cast<std::size_t>(n_clusters));
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            out[i] = detail::silhouette_of(emb, labels, sizes, static_cast<std::size_t>(i), scratch);
        }
    }
    return out;
}

std::vector<int> assign_nearest(const Matrix& data, const Matrix& centroids) {
    std::vector<int> out(data.rows(), 0);
    const auto n = static_cast<std::ptrdiff_t>(data.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[i] = detail::nearest_centroid(data, centroids, static_cast<std::size_t>(i));
    }
    return out;
}

}  // namespace gcal::kernels
