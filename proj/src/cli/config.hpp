#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gcal/dataset.hpp"
#include "gcal/encoder.hpp"
#include "gcal/loss.hpp"
#include "gcal/pipeline.hpp"
#include "gcal/sampler.hpp"

namespace gcal::cli {

/// Everything an experiment depends on. Loaded from a flat `key = value`
/// file, then overridden by `--set key=value` and dedicated flags.
struct RunConfig {
    std::optional<std::uint64_t> seed;
    std::string data;  // dataset directory; empty means generate from synth
    std::string out;
    int threads = 1;
    SynthSpec synth;
    GroupSet groups{false, true, true};
    LossConfig loss;
    TrainConfig train;
    RoundPlan plan;
    std::vector<StrategyKind> strategies{StrategyKind::random, StrategyKind::coreset_raw,
                                         StrategyKind::coreset_learned};

    /// Applies one key. Throws std::invalid_argument on unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    void load_file(const std::filesystem::path& path);
    /// Canonical key = value listing of every setting.
    std::string dump() const;

    std::uint64_t require_seed() const;
    std::vector<StrategySpec> strategy_specs() const;
};

/// Reference synthetic dataset used by the examples and acceptance suite.
SynthSpec reference_synth_spec(std::uint64_t seed);

}  // namespace gcal::cli
