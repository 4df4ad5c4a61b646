#pragma once

// Brute-force references and invariant checkers. Nothing here calls into the
// code path it checks: losses, statistics and distances are recomputed from
// their definitions with plain loops.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcal/dataset.hpp"
#include "gcal/encoder.hpp"
#include "gcal/loss.hpp"
#include "gcal/matrix.hpp"
#include "gcal/rng.hpp"
#include "gcal/sampler.hpp"

namespace gcal::oracle {

double brute_group_deviation(const DatasetIndex& ds, Grouping grouping);

double brute_cosine(std::span<const double> a, std::span<const double> b, double eps);
double brute_ntxent(const Matrix& z, double tau, double eps = 1e-12);

/// Group contrastive loss with an explicit membership predicate over rows.
/// `exclude_same_patient` = false drops the patient-exclusion indicator.
double brute_group_loss(const Matrix& z, const std::function<bool(std::size_t, std::size_t)>& same_group,
                        std::span<const int> patient, double group_size, double tau, double eps = 1e-12,
                        bool exclude_same_patient = true);

/// Weighted sum of brute-force terms read from the batch fields.
double brute_combined(const LossBatch& batch, const LossConfig& cfg, bool exclude_same_patient = true);

/// Random batch with N originals: patients in 0..n_patients-1, volumes
/// patient*n_groups + g, slice indices in 0..3; metadata mirrored on views.
LossBatch random_loss_batch(Rng& rng, std::size_t n, std::size_t dim, int n_patients, int n_groups);

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double step);

/// |a - b| / max(|a|, |b|, floor)
double relative_error(double a, double b, double floor = 1e-6);
double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-6);

/// Forward pass built from explicit weight matrices (matrix-vector products).
ForwardResult reference_forward(const EncoderParams& params, std::span<const double> pixels);

/// Largest b with sum_p min(c_p, b) >= per_batch * b: the most batches of
/// per_batch distinct patients that tuple counts c_p allow.
std::size_t max_batch_count(std::span<const std::size_t> tuples_per_patient, std::size_t per_batch);

/// First violated sampler invariant, if any.
std::optional<std::string> check_epoch(const DatasetIndex& ds, const GroupSet& groups, const EpochPlan& plan);

double brute_silhouette(const Matrix& emb, std::span<const int> labels);
double brute_cover_radius(const Matrix& emb, std::span<const std::size_t> labeled);

struct GradientCheck {
    double max_rel_error = 0.0;
    std::size_t entries = 0;
};

/// loss_grad vs central differences on a random batch.
GradientCheck check_loss_gradient(std::uint64_t seed, double step = 1e-5);
/// Full encoder backprop vs central differences for one random batch.
GradientCheck check_encoder_gradient(std::uint64_t seed, double step = 1e-5);

struct TwoApproxCheck {
    double greedy_radius = 0.0;
    double optimal_radius = 0.0;
};

/// Random instance with n <= 12, k <= 4 (and a random initial set).
TwoApproxCheck check_two_approx(std::uint64_t seed);

}  // namespace gcal::oracle
