#include "gcal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "binary_io.hpp"
#include "gcal/kernels.hpp"
#include "gcal/rng.hpp"

namespace gcal {

using nlohmann::json;

DatasetIndex::DatasetIndex(std::vector<SliceRecord> slices, int height, int width)
    : slices_(std::move(slices)), height_(height), width_(width) {
    if (height < 0 || width < 0) {
        throw std::invalid_argument("dataset: negative image shape");
    }
    dim_ = slices_.empty() ? static_cast<std::size_t>(height) * static_cast<std::size_t>(width)
                           : slices_.front().pixels.size();
    if (static_cast<std::size_t>(height) * static_cast<std::size_t>(width) != dim_) {
        throw std::invalid_argument("dataset: height*width does not match pixel count");
    }
    for (std::size_t pos = 0; pos < slices_.size(); ++pos) {
        const auto& s = slices_[pos];
        if (s.pixels.size() != dim_) {
            throw std::invalid_argument("dataset: inconsistent pixel count at slice " + std::to_string(s.slice_id));
        }
        if (s.slice_index < 0) {
            throw std::invalid_argument("dataset: negative slice_index");
        }
        if (!id_to_pos_.emplace(s.slice_id, pos).second) {
            throw std::invalid_argument("dataset: duplicate slice_id " + std::to_string(s.slice_id));
        }
        auto [it, inserted] = volume_patient_.emplace(s.volume_id, s.patient_id);
        if (!inserted && it->second != s.patient_id) {
            throw std::invalid_argument("dataset: volume " + std::to_string(s.volume_id) +
                                        " belongs to more than one patient");
        }
        if (inserted) {
            patient_volumes_[s.patient_id].push_back(s.volume_id);
        }
        volume_slices_[s.volume_id].push_back(pos);
    }
    for (auto& [vol, rows] : volume_slices_) {
        std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
            return slices_[a].slice_index < slices_[b].slice_index;
        });
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (slices_[rows[k]].slice_index != static_cast<int>(k)) {
                throw std::invalid_argument("dataset: slice indices of volume " + std::to_string(vol) +
                                            " are not contiguous from 0");
            }
        }
    }
    for (auto& [patient, vols] : patient_volumes_) {
        std::sort(vols.begin(), vols.end());
    }
}

std::size_t DatasetIndex::position_of(std::int64_t slice_id) const {
    auto it = id_to_pos_.find(slice_id);
    if (it == id_to_pos_.end()) {
        throw std::out_of_range("dataset: unknown slice_id " + std::to_string(slice_id));
    }
    return it->second;
}

Matrix DatasetIndex::pixel_matrix() const {
    Matrix m(slices_.size(), dim_);
    for (std::size_t i = 0; i < slices_.size(); ++i) {
        std::copy(slices_[i].pixels.begin(), slices_[i].pixels.end(), m.row(i).begin());
    }
    return m;
}

void SynthSpec::validate() const {
    if (n_patients < 1 || volumes_per_patient < 1 || slices_per_volume < 1) {
        throw std::invalid_argument("synth spec: zero slices requested");
    }
    if (height < 1 || width < 1) {
        throw std::invalid_argument("synth spec: image shape must be positive");
    }
    if (class_count < 2) {
        throw std::invalid_argument("synth spec: class_count must be at least 2");
    }
    for (double s : {patient_scale, volume_scale, adjacent_scale, noise_scale}) {
        if (!(s >= 0.0) || !std::isfinite(s)) {
            throw std::invalid_argument("synth spec: scales must be finite and non-negative");
        }
    }
}

namespace {

std::vector<double> normal_vector(Rng& rng, std::size_t dim, double scale) {
    std::vector<double> v(dim);
    for (auto& x : v) {
        x = scale * rng.normal();
    }
    return v;
}

}  // namespace

LabeledDataset generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    const std::size_t dim = static_cast<std::size_t>(spec.height) * static_cast<std::size_t>(spec.width);
    const int depth = spec.slices_per_volume;
    // Class bands along the depth axis: two halves of each volume.
    const int bands = depth >= 2 ? 2 : 1;

    Rng rng(spec.seed);
    // Depth profile shared by every volume (anatomy that repeats across scans).
    const auto shared_cos = normal_vector(rng, dim, 1.0);
    const auto shared_sin = normal_vector(rng, dim, 1.0);

    std::vector<SliceRecord> slices;
    std::vector<int> labels;
    slices.reserve(static_cast<std::size_t>(spec.n_patients * spec.volumes_per_patient * depth));

    int volume_id = 0;
    std::int64_t slice_id = 0;
    for (int p = 0; p < spec.n_patients; ++p) {
        const auto patient_offset = normal_vector(rng, dim, spec.patient_scale);
        // Volumes of one patient share a base class; the depth band shifts it.
        const int base_class = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.class_count)));
        for (int v = 0; v < spec.volumes_per_patient; ++v, ++volume_id) {
            const auto volume_offset = normal_vector(rng, dim, spec.volume_scale);
            const auto own_cos = normal_vector(rng, dim, 1.0);
            const auto own_sin = normal_vector(rng, dim, 1.0);
            for (int k = 0; k < depth; ++k, ++slice_id) {
                const double t = depth > 1 ? static_cast<double>(k) / (depth - 1) : 0.0;
                const double c = std::cos(M_PI * t) * M_SQRT1_2 * spec.adjacent_scale;
                const double s = std::sin(M_PI * t) * M_SQRT1_2 * spec.adjacent_scale;
                SliceRecord rec;
                rec.slice_id = slice_id;
                rec.patient_id = p;
                rec.volume_id = volume_id;
                rec.slice_index = k;
                rec.pixels.resize(dim);
                for (std::size_t d = 0; d < dim; ++d) {
                    const double smooth = c * (shared_cos[d] + own_cos[d]) * M_SQRT1_2 +
                                          s * (shared_sin[d] + own_sin[d]) * M_SQRT1_2;
                    const double noise = spec.noise_scale * rng.normal();
                    const double value = patient_offset[d] + volume_offset[d] + smooth + noise;
                    rec.pixels[d] = static_cast<double>(static_cast<float>(value));
                }
                const int band = k * bands / depth;
                labels.push_back((base_class + band) % spec.class_count);
                slices.push_back(std::move(rec));
            }
        }
    }
    return {DatasetIndex(std::move(slices), spec.height, spec.width), std::move(labels), spec.class_count};
}

std::string to_string(Grouping g) {
    switch (g) {
        case Grouping::dataset: return "dataset";
        case Grouping::patient: return "patient";
        case Grouping::volume: return "volume";
        case Grouping::adjacent: return "adjacent";
    }
    return "?";
}

Grouping parse_grouping(const std::string& name) {
    for (auto g : {Grouping::dataset, Grouping::patient, Grouping::volume, Grouping::adjacent}) {
        if (to_string(g) == name) {
            return g;
        }
    }
    throw std::invalid_argument("unknown grouping '" + name + "'");
}

double group_deviation(const DatasetIndex& ds, Grouping grouping) {
    Matrix pixels = ds.pixel_matrix();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : pixels.data()) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    const double span = hi - lo;
    for (double& x : pixels.data()) {
        x = span > 0.0 ? (x - lo) / span : 0.0;
    }

    std::vector<std::vector<std::size_t>> groups;
    switch (grouping) {
        case Grouping::dataset: {
            std::vector<std::size_t> all(ds.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
            groups.push_back(std::move(all));
            break;
        }
        case Grouping::patient:
            for (const auto& [patient, vols] : ds.patient_volumes()) {
                std::vector<std::size_t> members;
                for (int v : vols) {
                    const auto& rows = ds.volume_slices().at(v);
                    members.insert(members.end(), rows.begin(), rows.end());
                }
                groups.push_back(std::move(members));
            }
            break;
        case Grouping::volume:
            for (const auto& [vol, rows] : ds.volume_slices()) {
                groups.push_back(rows);
            }
            break;
        case Grouping::adjacent:
            for (const auto& [vol, rows] : ds.volume_slices()) {
                for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
                    groups.push_back({rows[k], rows[k + 1]});
                }
            }
            break;
    }

    double total = 0.0;
    std::size_t counted = 0;
    for (const auto& g : groups) {
        if (g.size() < 2) {
            continue;
        }
        const double pairs = static_cast<double>(g.size()) * static_cast<double>(g.size() - 1) / 2.0;
        total += kernels::pairwise_abs_deviation_sum(pixels, g) / pairs;
        ++counted;
    }
    if (counted == 0) {
        throw std::domain_error("group_deviation: no " + to_string(grouping) + " group has two members");
    }
    return total / static_cast<double>(counted);
}

namespace {

json spec_to_json(const SynthSpec& s) {
    return {{"n_patients", s.n_patients},         {"volumes_per_patient", s.volumes_per_patient},
            {"slices_per_volume", s.slices_per_volume}, {"height", s.height},
            {"width", s.width},                   {"class_count", s.class_count},
            {"patient_scale", s.patient_scale},   {"volume_scale", s.volume_scale},
            {"adjacent_scale", s.adjacent_scale}, {"noise_scale", s.noise_scale},
            {"seed", s.seed}};
}

}  // namespace

void write_dataset_dir(const std::filesystem::path& dir, const LabeledDataset& data,
                       const std::optional<SynthSpec>& spec) {
    std::filesystem::create_directories(dir);
    const auto& ds = data.index;
    json meta;
    meta["format"] = "gcal-dataset";
    meta["version"] = 1;
    meta["height"] = ds.height();
    meta["width"] = ds.width();
    meta["count"] = ds.size();
    json rows = json::array();
    for (const auto& s : ds.slices()) {
        rows.push_back({{"slice_id", s.slice_id},
                        {"patient_id", s.patient_id},
                        {"volume_id", s.volume_id},
                        {"slice_index", s.slice_index}});
    }
    meta["slices"] = std::move(rows);
    meta["synth_spec"] = spec ? spec_to_json(*spec) : json(nullptr);
    binio::write_file(dir / "meta.json", meta.dump(1) + "\n");

    std::string blob;
    blob.reserve(ds.size() * ds.dim() * 4);
    for (const auto& s : ds.slices()) {
        for (double x : s.pixels) {
            binio::put_f32(blob, x);
        }
    }
    binio::write_file(dir / "data.bin", blob);

    json labels = {{"class_count", data.class_count}, {"labels", data.labels}};
    binio::write_file(dir / "labels.json", labels.dump() + "\n");
}

LabeledDataset read_dataset_dir(const std::filesystem::path& dir) {
    const json meta = json::parse(binio::read_file(dir / "meta.json"));
    if (meta.value("format", "") != "gcal-dataset" || meta.value("version", 0) != 1) {
        throw std::runtime_error("dataset: unsupported meta.json format");
    }
    const int height = meta.at("height").get<int>();
    const int width = meta.at("width").get<int>();
    const std::size_t dim = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    const auto& rows = meta.at("slices");
    const std::string blob = binio::read_file(dir / "data.bin");
    if (blob.size() != rows.size() * dim * 4) {
        throw std::runtime_error("dataset: data.bin size does not match meta.json");
    }
    std::vector<SliceRecord> slices;
    slices.reserve(rows.size());
    std::size_t offset = 0;
    for (const auto& r : rows) {
        SliceRecord s;
        s.slice_id = r.at("slice_id").get<std::int64_t>();
        s.patient_id = r.at("patient_id").get<int>();
        s.volume_id = r.at("volume_id").get<int>();
        s.slice_index = r.at("slice_index").get<int>();
        s.pixels.resize(dim);
        for (auto& x : s.pixels) {
            x = binio::get_f32(blob, offset);
            offset += 4;
            if (!std::isfinite(x)) {
                throw std::runtime_error("dataset: non-finite pixel value");
            }
        }
        slices.push_back(std::move(s));
    }
    LabeledDataset out{DatasetIndex(std::move(slices), height, width), {}, 0};
    const auto labels_path = dir / "labels.json";
    if (std::filesystem::exists(labels_path)) {
        const json labels = json::parse(binio::read_file(labels_path));
        out.class_count = labels.at("class_count").get<int>();
        out.labels = labels.at("labels").get<std::vector<int>>();
        if (out.labels.size() != out.index.size()) {
            throw std::runtime_error("dataset: labels.json count does not match meta.json");
        }
    }
    return out;
}

}  // namespace gcal
