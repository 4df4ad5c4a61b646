#include "gcal/sampler.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "gcal/rng.hpp"

namespace gcal {

std::string to_string(GroupType g) {
    switch (g) {
        case GroupType::slice: return "slice";
        case GroupType::volume: return "volume";
        case GroupType::patient: return "patient";
    }
    return "?";
}

bool GroupSet::contains(GroupType g) const {
    switch (g) {
        case GroupType::slice: return slice;
        case GroupType::volume: return volume;
        case GroupType::patient: return patient;
    }
    return false;
}

std::vector<GroupType> GroupSet::members() const {
    std::vector<GroupType> out;
    if (slice) out.push_back(GroupType::slice);
    if (volume) out.push_back(GroupType::volume);
    if (patient) out.push_back(GroupType::patient);
    return out;
}

GroupSet GroupSet::parse(const std::string& text) {
    GroupSet set;
    if (text.empty() || text == "none") {
        return set;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "slice" || item == "adjacent") {
            set.slice = true;
        } else if (item == "volume") {
            set.volume = true;
        } else if (item == "patient") {
            set.patient = true;
        } else {
            throw std::invalid_argument("unknown group '" + item + "'");
        }
    }
    return set;
}

std::string GroupSet::str() const {
    std::string out;
    for (auto g : members()) {
        if (!out.empty()) out += ",";
        out += to_string(g);
    }
    return out.empty() ? "none" : out;
}

std::size_t tuple_width(const GroupSet& groups) { return 1 + groups.count(); }

std::vector<std::int64_t> AnchorTuple::slice_ids() const {
    std::vector<std::int64_t> ids{anchor};
    for (const auto& [g, id] : companions) {
        ids.push_back(id);
    }
    return ids;
}

namespace {

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& pool) {
    return pool[static_cast<std::size_t>(rng.below(pool.size()))];
}

}  // namespace

EpochPlan build_epoch(const DatasetIndex& ds, const GroupSet& groups, std::size_t batch_size,
                      std::uint64_t seed) {
    const std::size_t width = tuple_width(groups);
    if (batch_size == 0 || batch_size % width != 0) {
        throw std::invalid_argument("build_epoch: batch size " + std::to_string(batch_size) +
                                    " is not a positive multiple of tuple width " + std::to_string(width));
    }
    Rng rng(seed);

    // Tuple construction, patient by patient.
    std::vector<std::vector<AnchorTuple>> per_patient;
    std::size_t built = 0;
    for (const auto& [patient, volumes] : ds.patient_volumes()) {
        std::vector<AnchorTuple> tuples;
        for (int vol : volumes) {
            const auto& rows = ds.volume_slices().at(vol);
            std::vector<std::size_t> other_volumes;
            if (groups.patient) {
                for (int other : volumes) {
                    if (other != vol) {
                        const auto& o = ds.volume_slices().at(other);
                        other_volumes.insert(other_volumes.end(), o.begin(), o.end());
                    }
                }
            }
            for (std::size_t k = 0; k < rows.size(); ++k) {
                AnchorTuple t;
                t.anchor = ds.slice(rows[k]).slice_id;
                std::vector<std::size_t> same_volume;
                for (std::size_t j = 0; j < rows.size(); ++j) {
                    if (j != k) same_volume.push_back(rows[j]);
                }
                if (groups.slice) {
                    std::vector<std::size_t> neighbours;
                    if (k > 0) neighbours.push_back(rows[k - 1]);
                    if (k + 1 < rows.size()) neighbours.push_back(rows[k + 1]);
                    const std::size_t c = neighbours.empty() ? rows[k] : pick(rng, neighbours);
                    t.companions.emplace_back(GroupType::slice, ds.slice(c).slice_id);
                }
                if (groups.volume) {
                    if (same_volume.empty()) {
                        throw std::invalid_argument("build_epoch: volume " + std::to_string(vol) +
                                                    " has a single slice; volume companion impossible");
                    }
                    t.companions.emplace_back(GroupType::volume, ds.slice(pick(rng, same_volume)).slice_id);
                }
                if (groups.patient) {
                    const auto& pool = other_volumes.empty() ? same_volume : other_volumes;
                    if (pool.empty()) {
                        throw std::invalid_argument("build_epoch: patient " + std::to_string(patient) +
                                                    " has a single slice; patient companion impossible");
                    }
                    t.companions.emplace_back(GroupType::patient, ds.slice(pick(rng, pool)).slice_id);
                }
                tuples.push_back(std::move(t));
                ++built;
            }
        }
        per_patient.push_back(std::move(tuples));
    }

    // Batch composition: tuples_per_batch distinct patients per batch.
    EpochPlan plan;
    plan.batch_size = batch_size;
    plan.width = width;
    plan.tuples_built = built;
    const std::size_t per_batch = batch_size / width;
    std::vector<std::size_t> order(per_patient.size());
    for (std::size_t p = 0; p < order.size(); ++p) order[p] = p;

    while (true) {
        std::vector<std::size_t> available;
        for (std::size_t p : order) {
            if (!per_patient[p].empty()) available.push_back(p);
        }
        if (available.size() < per_batch) {
            break;
        }
        rng.shuffle(available);
        std::stable_sort(available.begin(), available.end(), [&](std::size_t a, std::size_t b) {
            return per_patient[a].size() > per_patient[b].size();
        });
        std::vector<AnchorTuple> batch;
        batch.reserve(per_batch);
        for (std::size_t s = 0; s < per_batch; ++s) {
            auto& pool = per_patient[available[s]];
            const std::size_t j = static_cast<std::size_t>(rng.below(pool.size()));
            std::swap(pool[j], pool.back());
            batch.push_back(std::move(pool.back()));
            pool.pop_back();
        }
        plan.batches.push_back(std::move(batch));
    }
    return plan;
}

std::string epoch_plan_to_json(const EpochPlan& plan) {
    nlohmann::json j;
    j["batch_size"] = plan.batch_size;
    j["tuple_width"] = plan.width;
    j["tuples_built"] = plan.tuples_built;
    nlohmann::json batches = nlohmann::json::array();
    for (const auto& batch : plan.batches) {
        nlohmann::json b = nlohmann::json::array();
        for (const auto& t : batch) {
            nlohmann::json comps = nlohmann::json::array();
            for (const auto& [g, id] : t.companions) {
                comps.push_back({{"group", to_string(g)}, {"slice_id", id}});
            }
            b.push_back({{"anchor", t.anchor}, {"companions", comps}});
        }
        batches.push_back(std::move(b));
    }
    j["batches"] = std::move(batches);
    return j.dump(1) + "\n";
}

}  // namespace gcal
