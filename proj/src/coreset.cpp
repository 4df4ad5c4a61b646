#include "gcal/coreset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

#include "gcal/kernels.hpp"
#include "gcal/rng.hpp"

namespace gcal {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double d_phi(const Matrix& emb, std::size_t i, std::size_t j) {
    if (i >= emb.rows() || j >= emb.rows()) {
        throw std::out_of_range("d_phi: row index out of range");
    }
    return kernels::distance(emb.row(i), emb.row(j));
}

SelectionState SelectionState::start(const Matrix& emb, std::span<const std::size_t> initial) {
    SelectionState s;
    s.is_labeled.assign(emb.rows(), 0);
    s.min_dist.assign(emb.rows(), kInf);
    for (std::size_t r : initial) {
        if (r >= emb.rows()) {
            throw std::out_of_range("selection: initial row out of range");
        }
        if (!s.is_labeled[r]) {
            s.is_labeled[r] = 1;
            s.labeled.push_back(r);
            kernels::update_min_dist(emb, r, s.min_dist);
        }
    }
    return s;
}

void SelectionState::add(const Matrix& emb, std::size_t row) {
    trace.push_back({row, min_dist[row]});
    is_labeled[row] = 1;
    labeled.push_back(row);
    kernels::update_min_dist(emb, row, min_dist);
}

void extend_k_center(const Matrix& emb, SelectionState& state, std::size_t k,
                     std::optional<std::size_t> cold_start) {
    const std::size_t unlabeled = emb.rows() - state.labeled.size();
    if (k > unlabeled) {
        throw std::invalid_argument("k_center_greedy: budget " + std::to_string(k) + " exceeds " +
                                    std::to_string(unlabeled) + " unlabeled rows");
    }
    for (std::size_t step = 0; step < k; ++step) {
        std::size_t pick;
        if (state.labeled.empty()) {
            pick = cold_start.value_or(0);
            if (pick >= emb.rows()) {
                throw std::out_of_range("k_center_greedy: cold-start row out of range");
            }
        } else {
            pick = kernels::argmax_unlabeled(state.min_dist, state.is_labeled);
        }
        state.add(emb, pick);
    }
}

SelectionState k_center_greedy(const Matrix& emb, std::span<const std::size_t> initial, std::size_t k,
                               std::optional<std::size_t> cold_start) {
    SelectionState state = SelectionState::start(emb, initial);
    extend_k_center(emb, state, k, cold_start);
    return state;
}

KCenterSolution brute_force_k_center(const Matrix& emb, std::span<const std::size_t> initial, std::size_t k) {
    const std::size_t n = emb.rows();
    std::vector<char> fixed(n, 0);
    for (std::size_t r : initial) fixed.at(r) = 1;
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < n; ++i) {
        if (!fixed[i]) candidates.push_back(i);
    }
    if (k > candidates.size()) {
        throw std::invalid_argument("brute_force_k_center: k exceeds unlabeled count");
    }
    // C(m, k) with early exit above the limit.
    double subsets = 1.0;
    for (std::size_t t = 0; t < k; ++t) {
        subsets = subsets * static_cast<double>(candidates.size() - t) / static_cast<double>(t + 1);
    }
    if (subsets > 1e6) {
        throw std::invalid_argument("brute_force_k_center: instance too large for exhaustive search");
    }

    Matrix dist(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) dist(i, j) = kernels::distance(emb.row(i), emb.row(j));
    }
    std::vector<double> base(n, kInf);
    for (std::size_t r : initial) {
        for (std::size_t i = 0; i < n; ++i) base[i] = std::min(base[i], dist(i, r));
    }

    KCenterSolution best{kInf, {}};
    std::vector<std::size_t> pick(k);
    for (std::size_t t = 0; t < k; ++t) pick[t] = t;
    while (true) {
        double radius = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double m = base[i];
            for (std::size_t t = 0; t < k; ++t) m = std::min(m, dist(i, candidates[pick[t]]));
            radius = std::max(radius, m);
        }
        if (radius < best.radius || best.centers.size() != k) {
            best.radius = radius;
            best.centers.clear();
            for (std::size_t t = 0; t < k; ++t) best.centers.push_back(candidates[pick[t]]);
        }
        // Next combination in lexicographic order.
        std::size_t t = k;
        while (t > 0 && pick[t - 1] == candidates.size() - k + t - 1) --t;
        if (t == 0) break;
        ++pick[t - 1];
        for (std::size_t u = t; u < k; ++u) pick[u] = pick[u - 1] + 1;
    }
    return best;
}

double cover_radius(const Matrix& emb, std::span<const std::size_t> labeled) {
    if (labeled.empty()) {
        throw std::invalid_argument("cover_radius: labeled set is empty");
    }
    for (std::size_t r : labeled) {
        if (r >= emb.rows()) throw std::out_of_range("cover_radius: row out of range");
    }
    return kernels::cover_radius(emb, labeled);
}

double silhouette_score(const Matrix& emb, std::span<const int> cluster_labels) {
    if (cluster_labels.size() != emb.rows()) {
        throw std::invalid_argument("silhouette_score: one label per row required");
    }
    std::map<int, int> compact;
    for (int l : cluster_labels) compact.emplace(l, 0);
    if (compact.size() < 2) {
        throw std::invalid_argument("silhouette_score: need at least two clusters");
    }
    int next = 0;
    for (auto& [label, id] : compact) id = next++;
    std::vector<int> labels(cluster_labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = compact[cluster_labels[i]];

    const auto values = kernels::silhouette_values(emb, labels, next);
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

std::vector<int> kmeans(const Matrix& data, std::size_t k, std::uint64_t seed, int max_iter) {
    const std::size_t n = data.rows();
    if (k == 0 || k > n) {
        throw std::invalid_argument("kmeans: k must be in 1..n");
    }
    Rng rng(seed);
    Matrix centroids(k, data.cols());
    // k-means++ seeding.
    std::vector<double> d2(n, kInf);
    std::size_t first = static_cast<std::size_t>(rng.below(n));
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t chosen = first;
        if (c > 0) {
            double total = 0.0;
            for (double v : d2) total += v;
            if (total > 0.0) {
                double target = rng.uniform() * total;
                chosen = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    target -= d2[i];
                    if (target < 0.0) {
                        chosen = i;
                        break;
                    }
                }
            } else {
                chosen = static_cast<std::size_t>(rng.below(n));
            }
        }
        std::copy(data.row(chosen).begin(), data.row(chosen).end(), centroids.row(c).begin());
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], kernels::squared_distance(data.row(i), centroids.row(c)));
        }
    }

    std::vector<int> labels(n, -1);
    for (int iter = 0; iter < max_iter; ++iter) {
        auto next = kernels::assign_nearest(data, centroids);
        if (next == labels) break;
        labels = std::move(next);
        Matrix sums(k, data.cols());
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(labels[i]);
            ++counts[c];
            for (std::size_t d = 0; d < data.cols(); ++d) sums(c, d) += data(i, d);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its centroid
            for (std::size_t d = 0; d < data.cols(); ++d) {
                centroids(c, d) = sums(c, d) / static_cast<double>(counts[c]);
            }
        }
    }
    return labels;
}

}  // namespace gcal
