#include <algorithm>

#include "gcal/kernels.hpp"
#include "kernels_detail.hpp"

namespace gcal::kernels::serial {

void update_min_dist(const Matrix& emb, std::size_t center, std::span<double> min_dist) {
    for (std::size_t i = 0; i < emb.rows(); ++i) {
        min_dist[i] = std::min(min_dist[i], distance(emb.row(i), emb.row(center)));
    }
}

std::size_t argmax_unlabeled(std::span<const double> min_dist, std::span<const char> labeled) {
    std::size_t best = npos;
    for (std::size_t i = 0; i < min_dist.size(); ++i) {
        if (!labeled[i] && (best == npos || min_dist[i] > min_dist[best])) {
            best = i;
        }
    }
    return best;
}

double cover_radius(const Matrix& emb, std::span<const std::size_t> centers) {
    double radius = 0.0;
    for (std::size_t i = 0; i < emb.rows(); ++i) {
        radius = std::max(radius, detail::nearest_center_distance(emb, i, centers));
    }
    return radius;
}

std::vector<std::size_t> nearest_reference(const Matrix& data, std::span<const std::size_t> refs,
                                           std::span<const std::size_t> queries) {
    std::vector<std::size_t> out;
    out.reserve(queries.size());
    for (std::size_t q : queries) {
        out.push_back(detail::nearest_of(data, q, refs));
    }
    return out;
}

double pairwise_abs_deviation_sum(const Matrix& data, std::span<const std::size_t> members) {
    double total = 0.0;
    for (std::size_t a = 0; a < members.size(); ++a) {
        total += detail::abs_deviation_row_sum(data, members, a);
    }
    return total;
}

std::vector<double> silhouette_values(const Matrix& emb, std::span<const int> labels, int n_clusters) {
    const auto sizes = detail::cluster_sizes(labels, n_clusters);
    std::vector<double> scratch(static_cast<std::size_t>(n_clusters));
    std::vector<double> out(emb.rows());
    for (std::size_t i = 0; i < emb.rows(); ++i) {
        out[i] = detail::silhouette_of(emb, labels, sizes, i, scratch);
    }
    return out;
}

std::vector<int> assign_nearest(const Matrix& data, const Matrix& centroids) {
    std::vector<int> out(data.rows());
    for (std::size_t i = 0; i < data.rows(); ++i) {
        out[i] = detail::nearest_centroid(data, centroids, i);
    }
    return out;
}

}  // namespace gcal::kernels::serial
