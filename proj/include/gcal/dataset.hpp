#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "gcal/matrix.hpp"

namespace gcal {

/// One 2D slice: the atomic unit of annotation.
struct SliceRecord {
    std::int64_t slice_id = 0;
    int patient_id = 0;
    int volume_id = 0;
    int slice_index = 0;  // position along the depth axis
    std::vector<double> pixels;
};

/// Patient -> volume -> slice hierarchy over an ordered slice list.
///
/// Construction validates the hierarchy: slice ids are unique, each volume
/// belongs to one patient, slice indices inside a volume are exactly 0..d-1,
/// and every slice has the same pixel count. Row positions (0..n-1) are the
/// handle used by the numeric code; slice ids are only for reporting.
class DatasetIndex {
public:
    DatasetIndex() = default;
    DatasetIndex(std::vector<SliceRecord> slices, int height, int width);

    std::size_t size() const { return slices_.size(); }
    std::size_t dim() const { return dim_; }
    int height() const { return height_; }
    int width() const { return width_; }

    const std::vector<SliceRecord>& slices() const { return slices_; }
    const SliceRecord& slice(std::size_t pos) const { return slices_[pos]; }
    std::size_t position_of(std::int64_t slice_id) const;

    /// Patients in ascending id order.
    const std::map<int, std::vector<int>>& patient_volumes() const { return patient_volumes_; }
    /// Row positions of each volume ordered by slice_index.
    const std::map<int, std::vector<std::size_t>>& volume_slices() const { return volume_slices_; }
    int patient_of_volume(int volume_id) const { return volume_patient_.at(volume_id); }

    /// n x dim copy of all pixel vectors.
    Matrix pixel_matrix() const;

private:
    std::vector<SliceRecord> slices_;
    int height_ = 0;
    int width_ = 0;
    std::size_t dim_ = 0;
    std::map<int, std::vector<int>> patient_volumes_;
    std::map<int, std::vector<std::size_t>> volume_slices_;
    std::map<int, int> volume_patient_;
    std::unordered_map<std::int64_t, std::size_t> id_to_pos_;
};

/// Parameters of the hierarchical synthetic generator.
struct SynthSpec {
    int n_patients = 20;
    int volumes_per_patient = 2;
    int slices_per_volume = 12;
    int height = 16;
    int width = 16;
    int class_count = 8;
    double patient_scale = 1.5;
    double volume_scale = 0.5;
    double adjacent_scale = 1.0;
    double noise_scale = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct LabeledDataset {
    DatasetIndex index;
    std::vector<int> labels;
    int class_count = 0;
};

/// Pure function of the SynthSpec. Pixels are rounded to float precision so the
/// dataset survives a float32 round trip through data.bin unchanged.
LabeledDataset generate_synthetic(const SynthSpec& spec);

enum class Grouping { dataset, patient, volume, adjacent };

std::string to_string(Grouping g);
Grouping parse_grouping(const std::string& name);

/// Mean pairwise absolute deviation of min-max normalized pixels, computed
/// per group and averaged with equal weight per group. For `adjacent` each
/// pair of neighbouring slices (|index difference| = 1) is its own group.
/// Throws std::domain_error when no group has two members.
double group_deviation(const DatasetIndex& ds, Grouping grouping);

/// Dataset directory: meta.json, data.bin (float32 LE row-major), labels.json.
void write_dataset_dir(const std::filesystem::path& dir, const LabeledDataset& data,
                       const std::optional<SynthSpec>& spec = std::nullopt);
LabeledDataset read_dataset_dir(const std::filesystem::path& dir);

}  // namespace gcal
