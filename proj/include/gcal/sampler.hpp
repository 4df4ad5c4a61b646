#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gcal/dataset.hpp"

namespace gcal {

enum class GroupType { slice, volume, patient };

std::string to_string(GroupType g);

/// Set of enabled companion groups. Companions are always emitted in the
/// order slice, volume, patient.
struct GroupSet {
    bool slice = false;
    bool volume = false;
    bool patient = false;

    std::size_t count() const { return std::size_t{slice} + volume + patient; }
    bool contains(GroupType g) const;
    std::vector<GroupType> members() const;
    /// Comma separated, e.g. "slice,volume". Empty string or "none" is the empty set.
    static GroupSet parse(const std::string& text);
    std::string str() const;
    bool operator==(const GroupSet&) const = default;
};

std::size_t tuple_width(const GroupSet& groups);

struct AnchorTuple {
    std::int64_t anchor = 0;
    std::vector<std::pair<GroupType, std::int64_t>> companions;

    /// Slice ids in batch order: anchor first, then companions.
    std::vector<std::int64_t> slice_ids() const;
};

struct EpochPlan {
    std::size_t batch_size = 0;  // slices per batch (M)
    std::size_t width = 0;       // slices per tuple
    std::vector<std::vector<AnchorTuple>> batches;
    /// Number of tuples built before batch composition (one per slice).
    std::size_t tuples_built = 0;
};

/// One epoch of the grouped batch sampler.
///
/// Every slice becomes the anchor of one tuple, with one random companion per
/// enabled group: an adjacent slice (boundary slices have a single neighbour;
/// one-slice volumes fall back to the anchor itself), another slice of the
/// same volume, and another slice of the same patient (from a different volume
/// when the patient has one). Tuples are then packed M / width at a time into
/// batches whose tuples come from distinct patients. Each batch draws from the
/// patients with the most remaining tuples (random tie-break), which drains
/// patients evenly and yields the largest possible batch count; tuples that
/// cannot form a full batch are dropped.
///
/// Throws std::invalid_argument when M is not a positive multiple of the tuple
/// width, or when a volume/patient companion pool is empty.
EpochPlan build_epoch(const DatasetIndex& ds, const GroupSet& groups, std::size_t batch_size,
                      std::uint64_t seed);

std::string epoch_plan_to_json(const EpochPlan& plan);

}  // namespace gcal
