#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "gcal/dataset.hpp"
#include "gcal/rng.hpp"
#include "gcal/sampler.hpp"
#include "oracles/oracles.hpp"

using namespace gcal;

namespace {

LabeledDataset make(int patients, int volumes, int slices, std::uint64_t seed = 1) {
    SynthSpec s;
    s.n_patients = patients;
    s.volumes_per_patient = volumes;
    s.slices_per_volume = slices;
    s.height = 1;
    s.width = 2;
    s.seed = seed;
    return generate_synthetic(s);
}

// Exhaustive search over which patients fill each batch, memoized on the
// sorted multiset of remaining counts.
std::size_t simulate_best(std::vector<std::size_t> counts, std::size_t per_batch) {
    std::map<std::vector<std::size_t>, std::size_t> memo;
    std::function<std::size_t(std::vector<std::size_t>)> go = [&](std::vector<std::size_t> c) -> std::size_t {
        std::sort(c.begin(), c.end());
        if (auto it = memo.find(c); it != memo.end()) return it->second;
        std::vector<std::size_t> live;
        for (std::size_t p = 0; p < c.size(); ++p)
            if (c[p] > 0) live.push_back(p);
        std::size_t best = 0;
        if (live.size() >= per_batch) {
            std::vector<char> pick(live.size(), 0);
            std::fill(pick.end() - static_cast<long>(per_batch), pick.end(), 1);
            do {
                auto next = c;
                for (std::size_t i = 0; i < live.size(); ++i)
                    if (pick[i]) --next[live[i]];
                best = std::max(best, 1 + go(next));
            } while (std::next_permutation(pick.begin(), pick.end()));
        }
        memo[c] = best;
        return best;
    };
    return go(std::move(counts));
}

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("tuple width") {
    CHECK(tuple_width(GroupSet{}) == 1);
    CHECK(tuple_width(GroupSet::parse("slice,volume")) == 3);
    CHECK(tuple_width(GroupSet::parse("slice,volume,patient")) == 4);
    CHECK(GroupSet::parse("patient,slice").str() == "slice,patient");
    CHECK(GroupSet::parse("none").count() == 0);
    CHECK_THROWS_AS(GroupSet::parse("organ"), std::invalid_argument);
}

TEST_CASE("default batch sizes") {
    CHECK(default_batch_size(GroupSet{}) == 8);
    CHECK(default_batch_size(GroupSet::parse("volume")) == 8);
    CHECK(default_batch_size(GroupSet::parse("volume,patient")) == 9);
    CHECK(default_batch_size(GroupSet::parse("slice,volume,patient")) == 8);
}

TEST_CASE("two patients with two slices each fill two batches") {
    const auto d = make(2, 1, 2);
    const auto groups = GroupSet::parse("slice,volume");
    const auto plan = build_epoch(d.index, groups, 6, 3);
    CHECK(plan.width == 3);
    CHECK(plan.tuples_built == 4);
    CHECK(plan.batches.size() == 2);
    for (const auto& b : plan.batches) {
        REQUIRE(b.size() == 2);
        CHECK(d.index.slice(d.index.position_of(b[0].anchor)).patient_id !=
              d.index.slice(d.index.position_of(b[1].anchor)).patient_id);
    }
    CHECK_FALSE(oracle::check_epoch(d.index, groups, plan).has_value());
}

TEST_CASE("a single patient cannot fill a two-tuple batch") {
    const auto d = make(1, 1, 4);
    const auto groups = GroupSet::parse("slice");
    CHECK(build_epoch(d.index, groups, 4, 1).batches.empty());
    const auto one = build_epoch(d.index, groups, 2, 1);
    CHECK(one.batches.size() == 4);
    for (const auto& b : one.batches) CHECK(b.size() == 1);
}

TEST_CASE("all groups in batches of eight") {
    const auto d = make(4, 2, 5);
    const auto groups = GroupSet::parse("slice,volume,patient");
    const auto plan = build_epoch(d.index, groups, 8, 9);
    CHECK(plan.width == 4);
    for (const auto& b : plan.batches) {
        CHECK(b.size() == 2);
        std::size_t slices = 0;
        for (const auto& t : b) slices += t.slice_ids().size();
        CHECK(slices == 8);
    }
}

TEST_CASE("companions are valid") {
    const auto d = make(3, 2, 4);
    const auto groups = GroupSet::parse("slice,volume,patient");
    const auto plan = build_epoch(d.index, groups, 4, 5);
    for (const auto& b : plan.batches) {
        for (const auto& t : b) {
            const auto& a = d.index.slice(d.index.position_of(t.anchor));
            REQUIRE(t.companions.size() == 3);
            CHECK(t.companions[0].first == GroupType::slice);
            CHECK(t.companions[1].first == GroupType::volume);
            CHECK(t.companions[2].first == GroupType::patient);
            const auto& s = d.index.slice(d.index.position_of(t.companions[0].second));
            CHECK(s.volume_id == a.volume_id);
            CHECK(std::abs(s.slice_index - a.slice_index) == 1);
            const auto& v = d.index.slice(d.index.position_of(t.companions[1].second));
            CHECK(v.volume_id == a.volume_id);
            CHECK(v.slice_id != a.slice_id);
            const auto& p = d.index.slice(d.index.position_of(t.companions[2].second));
            CHECK(p.patient_id == a.patient_id);
            CHECK(p.volume_id != a.volume_id);
        }
    }
}

TEST_CASE("boundary and single-slice fallbacks") {
    const auto d = make(2, 1, 1);
    const auto plan = build_epoch(d.index, GroupSet::parse("slice"), 4, 2);
    REQUIRE(plan.batches.size() == 1);
    for (const auto& t : plan.batches[0]) CHECK(t.companions[0].second == t.anchor);

    const auto two = make(2, 1, 2);
    const auto p2 = build_epoch(two.index, GroupSet::parse("slice"), 2, 2);
    for (const auto& b : p2.batches)
        for (const auto& t : b) CHECK(t.companions[0].second != t.anchor);
}

TEST_CASE("empty companion pools and bad batch sizes are errors") {
    const auto d = make(2, 1, 1);
    CHECK_THROWS_AS(build_epoch(d.index, GroupSet::parse("volume"), 4, 1), std::invalid_argument);
    CHECK_THROWS_AS(build_epoch(d.index, GroupSet::parse("patient"), 4, 1), std::invalid_argument);
    const auto e = make(2, 1, 3);
    CHECK_THROWS_AS(build_epoch(e.index, GroupSet::parse("slice,volume"), 8, 1), std::invalid_argument);
    CHECK_THROWS_AS(build_epoch(e.index, GroupSet::parse("slice"), 0, 1), std::invalid_argument);
}

TEST_CASE("plans are deterministic per seed and vary across epochs") {
    const auto d = make(3, 2, 6);
    const auto groups = GroupSet::parse("slice,volume,patient");
    CHECK(epoch_plan_to_json(build_epoch(d.index, groups, 8, 42)) == epoch_plan_to_json(build_epoch(d.index, groups, 8, 42)));
    // Over many epochs some anchor must see two different slice companions.
    std::map<std::int64_t, std::set<std::int64_t>> seen;
    for (std::uint64_t e = 0; e < 100; ++e) {
        const auto plan = build_epoch(d.index, groups, 8, derive_seed(7, e));
        for (const auto& b : plan.batches)
            for (const auto& t : b) seen[t.anchor].insert(t.companions[0].second);
    }
    bool varied = false;
    for (const auto& [a, s] : seen) varied = varied || s.size() >= 2;
    CHECK(varied);
}

TEST_CASE("batch count is the largest the patient constraint allows") {
    Rng rng(77);
    for (int t = 0; t < 40; ++t) {
        std::vector<std::size_t> counts(1 + rng.below(5));
        for (auto& c : counts) c = rng.below(7);
        const std::size_t per = 1 + rng.below(3);
        CHECK(oracle::max_batch_count(counts, per) == simulate_best(counts, per));
    }
    for (int t = 0; t < 30; ++t) {
        const auto d = make(1 + static_cast<int>(rng.below(5)), 1 + static_cast<int>(rng.below(2)),
                            2 + static_cast<int>(rng.below(4)), rng.bits());
        if (d.index.size() > 30) continue;
        const std::size_t per = 1 + rng.below(3);
        const auto groups = GroupSet::parse("volume");
        const auto plan = build_epoch(d.index, groups, 2 * per, rng.bits());
        std::vector<std::size_t> counts;
        for (const auto& [p, vols] : d.index.patient_volumes()) {
            std::size_t c = 0;
            for (int v : vols) c += d.index.volume_slices().at(v).size();
            counts.push_back(c);
        }
        CHECK(plan.batches.size() == simulate_best(counts, per));
        CHECK_FALSE(oracle::check_epoch(d.index, groups, plan).has_value());
    }
}

TEST_CASE("epoch plan serializes") {
    const auto d = make(2, 1, 2);
    const auto json = epoch_plan_to_json(build_epoch(d.index, GroupSet::parse("slice"), 4, 1));
    CHECK(json.find("\"batches\"") != std::string::npos);
}

}
