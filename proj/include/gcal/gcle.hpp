#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcal/dataset.hpp"
#include "gcal/matrix.hpp"

namespace gcal {

/// Per-row identity stored in the `<path>.meta.json` sidecar.
struct RowMeta {
    std::int64_t slice_id = 0;
    int patient_id = 0;
    int volume_id = 0;
    int slice_index = 0;

    bool operator==(const RowMeta&) const = default;
};

enum class GcleErrorKind { io, bad_magic, bad_version, truncated, count_mismatch, non_finite, bad_metadata };

class GcleError : public std::runtime_error {
public:
    GcleError(GcleErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    GcleErrorKind kind() const { return kind_; }

private:
    GcleErrorKind kind_;
};

/// "GCLE", u32 version (1), u32 rows, u32 dim, float32 row-major payload; all
/// little-endian. Values are stored as float32.
void write_gcle(const std::filesystem::path& path, const Matrix& matrix, const std::vector<RowMeta>& meta);

struct GcleFile {
    Matrix matrix;
    std::vector<RowMeta> meta;
};

GcleFile read_gcle(const std::filesystem::path& path);

std::filesystem::path gcle_meta_path(const std::filesystem::path& path);

/// GCLE rows become slices whose pixel vector is the embedding (height 1,
/// width = dim). Row i of the returned matrix corresponds to slice i.
struct ImportedEmbeddings {
    DatasetIndex index;
    Matrix matrix;
};

ImportedEmbeddings import_embeddings(const std::filesystem::path& path);

}  // namespace gcal
