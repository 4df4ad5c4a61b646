#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcal/dataset.hpp"
#include "gcal/encoder.hpp"
#include "gcal/loss.hpp"
#include "gcal/matrix.hpp"
#include "gcal/sampler.hpp"

namespace gcal {

struct RoundPlan {
    std::vector<double> fractions{0.02, 0.03, 0.04, 0.05, 0.10, 0.15, 0.20, 0.40};
    int n_repeats = 5;
    std::uint64_t master_seed = 0;

    void validate() const;
};

/// Cumulative budgets: round-half-up of fraction * n, at least 1 and never
/// below the previous round.
std::vector<std::size_t> budgets(const RoundPlan& plan, std::size_t n);

enum class StrategyKind { random, coreset_raw, coreset_learned };

std::string to_string(StrategyKind k);
StrategyKind parse_strategy_kind(const std::string& name);

struct StrategySpec {
    StrategyKind kind = StrategyKind::random;
    std::string name;  // report key; defaults to the kind name
    GroupSet groups;
    LossConfig loss;
    TrainConfig train;

    std::string label() const { return name.empty() ? to_string(kind) : name; }
};

struct RoundRecord {
    std::string strategy;
    int repeat = 0;
    int round = 0;
    double fraction = 0.0;
    std::size_t budget = 0;
    std::vector<std::int64_t> selected;  // slice ids in selection order
    std::optional<double> delta;          // own-space cover radius (coreset strategies)
    std::optional<double> delta_learned;  // cover radius in the repeat's learned space
    double accuracy = 0.0;
    double wall_seconds = 0.0;
};

struct SelectionEvent {
    std::string strategy;
    int repeat = 0;
    int round = 0;
    std::size_t rank = 0;
    std::int64_t slice_id = 0;
    std::optional<double> min_dist;  // empty for the cold-start pick
};

struct RoundReport {
    std::vector<double> fractions;
    std::vector<std::size_t> budgets;
    std::vector<RoundRecord> records;
    std::vector<SelectionEvent> trace;
    // Encoder loss history per (learned strategy, repeat).
    std::vector<std::pair<std::string, std::vector<double>>> loss_histories;

    const RoundRecord& find(const std::string& strategy, int repeat, int round) const;
    double mean_accuracy(const std::string& strategy, int round) const;
    std::optional<double> mean_delta(const std::string& strategy, int round) const;
};

/// 1-NN accuracy over unlabeled rows in `space` using the labeled rows as
/// references; 1.0 when nothing is unlabeled. Throws on an empty labeled set.
double probe_accuracy(const Matrix& space, std::span<const std::size_t> labeled, std::span<const int> labels);

/// Runs every strategy for every repeat. Learned strategies train their
/// encoder once per repeat on the whole pool. The first learned strategy's
/// embedding is the reference space for delta_learned.
RoundReport run_experiment(const DatasetIndex& ds, std::span<const int> labels,
                           const std::vector<StrategySpec>& strategies, const RoundPlan& plan);

/// report.json content (no timing; byte-stable for a fixed configuration).
std::string report_to_json(const RoundReport& report);
/// strategy,round_fraction,mean_accuracy,mean_delta
std::string summary_csv(const RoundReport& report);
/// JSON lines {strategy, repeat, round, rank, slice_id, min_dist}
std::string trace_jsonl(const RoundReport& report);
std::string timings_json(const RoundReport& report);

}  // namespace gcal
