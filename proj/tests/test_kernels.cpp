#include <doctest.h>

#include <omp.h>

#include "gcal/kernels.hpp"
#include "gcal/rng.hpp"

using namespace gcal;
namespace k = gcal::kernels;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t c = 0; c < cols; ++c) m(i, c) = rng.normal();
    return m;
}

struct ThreadGuard {
    int saved = omp_get_max_threads();
    ~ThreadGuard() { omp_set_num_threads(saved); }
};

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("parallel kernels reproduce the serial reference bit for bit") {
    ThreadGuard guard;
    Rng rng(5);
    const Matrix emb = random_matrix(rng, 203, 7);
    // Duplicate rows create exact ties for the argmax and nearest searches.
    Matrix tied = emb;
    for (std::size_t c = 0; c < tied.cols(); ++c) tied(50, c) = tied(10, c);

    std::vector<std::size_t> centers{3, 77, 150};
    std::vector<std::size_t> queries;
    for (std::size_t i = 0; i < 203; i += 2) queries.push_back(i);
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < 203; i += 3) members.push_back(i);
    std::vector<int> labels(203);
    for (auto& l : labels) l = static_cast<int>(rng.below(5));
    const Matrix centroids = random_matrix(rng, 5, 7);

    std::vector<double> ref_min(203, std::numeric_limits<double>::infinity());
    k::serial::update_min_dist(tied, 10, ref_min);
    k::serial::update_min_dist(tied, 100, ref_min);
    std::vector<char> lab(203, 0);
    lab[10] = lab[100] = 1;

    for (int threads : {1, 2, 3, 4, 7}) {
        CAPTURE(threads);
        omp_set_num_threads(threads);
        std::vector<double> md(203, std::numeric_limits<double>::infinity());
        k::update_min_dist(tied, 10, md);
        k::update_min_dist(tied, 100, md);
        CHECK(md == ref_min);
        CHECK(k::argmax_unlabeled(md, lab) == k::serial::argmax_unlabeled(ref_min, lab));
        CHECK(k::cover_radius(emb, centers) == k::serial::cover_radius(emb, centers));
        CHECK(k::nearest_reference(tied, centers, queries) == k::serial::nearest_reference(tied, centers, queries));
        CHECK(k::pairwise_abs_deviation_sum(emb, members) == k::serial::pairwise_abs_deviation_sum(emb, members));
        CHECK(k::silhouette_values(emb, labels, 5) == k::serial::silhouette_values(emb, labels, 5));
        CHECK(k::assign_nearest(emb, centroids) == k::serial::assign_nearest(emb, centroids));
    }
}

TEST_CASE("argmax ties go to the lowest unlabeled index") {
    std::vector<double> md{1.0, 3.0, 2.0, 3.0, 3.0};
    std::vector<char> lab{0, 1, 0, 0, 0};
    CHECK(k::argmax_unlabeled(md, lab) == 3);
    CHECK(k::serial::argmax_unlabeled(md, lab) == 3);
    std::vector<char> all(5, 1);
    CHECK(k::argmax_unlabeled(md, all) == k::npos);
}

TEST_CASE("distance") {
    std::vector<double> a{0.0, 0.0}, b{3.0, 4.0};
    CHECK(k::distance(a, b) == 5.0);
    CHECK(k::squared_distance(a, b) == 25.0);
}

}
