#include "gcal/gcle.hpp"

#include <cmath>

#include <json.hpp>

#include "binary_io.hpp"

namespace gcal {

std::filesystem::path gcle_meta_path(const std::filesystem::path& path) {
    return path.string() + ".meta.json";
}

void write_gcle(const std::filesystem::path& path, const Matrix& matrix, const std::vector<RowMeta>& meta) {
    if (meta.size() != matrix.rows()) {
        throw GcleError(GcleErrorKind::count_mismatch, "write_gcle: metadata rows do not match matrix rows");
    }
    for (double v : matrix.data()) {
        if (!std::isfinite(v) || !std::isfinite(static_cast<float>(v))) {
            throw GcleError(GcleErrorKind::non_finite, "write_gcle: non-finite value");
        }
    }
    std::string out = "GCLE";
    binio::put_u32(out, 1);
    binio::put_u32(out, static_cast<std::uint32_t>(matrix.rows()));
    binio::put_u32(out, static_cast<std::uint32_t>(matrix.cols()));
    for (double v : matrix.data()) binio::put_f32(out, v);
    binio::write_file(path, out);

    nlohmann::json rows = nlohmann::json::array();
    for (const auto& m : meta) {
        rows.push_back({{"slice_id", m.slice_id},
                        {"patient_id", m.patient_id},
                        {"volume_id", m.volume_id},
                        {"slice_index", m.slice_index}});
    }
    nlohmann::json j = {{"count", meta.size()}, {"rows", rows}};
    binio::write_file(gcle_meta_path(path), j.dump(1) + "\n");
}

GcleFile read_gcle(const std::filesystem::path& path) {
    std::string in;
    try {
        in = binio::read_file(path);
    } catch (const std::exception& e) {
        throw GcleError(GcleErrorKind::io, e.what());
    }
    if (in.size() < 4 || in.compare(0, 4, "GCLE") != 0) {
        throw GcleError(GcleErrorKind::bad_magic, "read_gcle: bad magic in " + path.string());
    }
    if (in.size() < 16) {
        throw GcleError(GcleErrorKind::truncated, "read_gcle: truncated header");
    }
    if (binio::get_u32(in, 4) != 1) {
        throw GcleError(GcleErrorKind::bad_version, "read_gcle: unsupported version " +
                                                        std::to_string(binio::get_u32(in, 4)));
    }
    const std::size_t rows = binio::get_u32(in, 8);
    const std::size_t dim = binio::get_u32(in, 12);
    if (in.size() != 16 + rows * dim * 4) {
        throw GcleError(in.size() < 16 + rows * dim * 4 ? GcleErrorKind::truncated : GcleErrorKind::count_mismatch,
                        "read_gcle: payload size does not match header");
    }
    GcleFile f{Matrix(rows, dim), {}};
    for (std::size_t k = 0; k < rows * dim; ++k) {
        const double v = binio::get_f32(in, 16 + 4 * k);
        if (!std::isfinite(v)) {
            throw GcleError(GcleErrorKind::non_finite, "read_gcle: non-finite value at entry " + std::to_string(k));
        }
        f.matrix.data()[k] = v;
    }

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(binio::read_file(gcle_meta_path(path)));
        for (const auto& r : meta.at("rows")) {
            f.meta.push_back({r.at("slice_id").get<std::int64_t>(), r.at("patient_id").get<int>(),
                              r.at("volume_id").get<int>(), r.at("slice_index").get<int>()});
        }
    } catch (const GcleError&) {
        throw;
    } catch (const std::exception& e) {
        throw GcleError(GcleErrorKind::bad_metadata, std::string("read_gcle: bad sidecar metadata: ") + e.what());
    }
    if (f.meta.size() != rows || meta.value("count", f.meta.size()) != f.meta.size()) {
        throw GcleError(GcleErrorKind::count_mismatch, "read_gcle: header has " + std::to_string(rows) +
                                                           " rows but metadata has " + std::to_string(f.meta.size()));
    }
    return f;
}

ImportedEmbeddings import_embeddings(const std::filesystem::path& path) {
    GcleFile f = read_gcle(path);
    std::vector<SliceRecord> slices;
    slices.reserve(f.meta.size());
    for (std::size_t i = 0; i < f.meta.size(); ++i) {
        const auto& m = f.meta[i];
        const auto row = f.matrix.row(i);
        slices.push_back({m.slice_id, m.patient_id, m.volume_id, m.slice_index, {row.begin(), row.end()}});
    }
    try {
        DatasetIndex index(std::move(slices), 1, static_cast<int>(f.matrix.cols()));
        return {std::move(index), std::move(f.matrix)};
    } catch (const std::invalid_argument& e) {
        throw GcleError(GcleErrorKind::bad_metadata, std::string("import_embeddings: ") + e.what());
    }
}

}  // namespace gcal
