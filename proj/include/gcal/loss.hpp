#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "gcal/dataset.hpp"
#include "gcal/matrix.hpp"
#include "gcal/sampler.hpp"

namespace gcal {

/// Embeddings for N slices and their N augmented views.
///
/// Row i (i < N) is a slice, row i + N is its augmented view and carries the
/// same metadata. `volume` may be left empty when the volume loss is unused;
/// `slice_positives[i]` (i < N) lists every row j != i in the adjacent-slice
/// group of anchor i and may be left empty when the slice loss is unused.
struct LossBatch {
    Matrix z;
    std::vector<int> patient;
    std::vector<int> volume;
    std::vector<std::vector<std::size_t>> slice_positives;

    std::size_t pairs() const { return z.rows() / 2; }
};

/// Metadata for a batch of dataset rows (positions), mirrored onto the
/// augmented half. Adjacent-slice positives are rows of the same volume whose
/// slice_index differs by at most one (this includes the anchor's own view).
/// The embedding matrix is left empty for the caller to fill.
LossBatch batch_metadata(const DatasetIndex& ds, std::span<const std::size_t> rows);

struct LossConfig {
    double tau = 0.1;
    // ntxent (0 or 1), patient, volume, slice
    std::array<double, 4> lambda{1.0, 0.05, 0.35, 0.0};
    double eps_norm = 1e-12;

    void validate() const;
};

double cosine_sim(std::span<const double> a, std::span<const double> b, double eps_norm = 1e-12);

double ntxent_loss(const LossBatch& batch, double tau, double eps_norm = 1e-12);

/// Group contrastive loss. Anchors are the N original rows; positives are all
/// other rows (originals and views) of the anchor's group; the softmax
/// denominator keeps row k when it is in the anchor's group or belongs to a
/// different patient. Scaled by 1 / (N * G), G being the mean group size over
/// the original rows (for slice groups: mean of 1 + original-row positives).
double group_loss(const LossBatch& batch, GroupType group, double tau, double eps_norm = 1e-12);

struct LossTerms {
    double ntxent = 0.0;
    double patient = 0.0;
    double volume = 0.0;
    double slice = 0.0;
    double total = 0.0;
};

/// Weighted sum; terms with zero weight are skipped and need no labels.
LossTerms combined_loss(const LossBatch& batch, const LossConfig& cfg);

struct LossAndGrad {
    double loss = 0.0;
    Matrix grad;  // 2N x e, d loss / d z
};

LossAndGrad loss_grad(const LossBatch& batch, const LossConfig& cfg);

}  // namespace gcal
