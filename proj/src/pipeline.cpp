#include "gcal/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "gcal/coreset.hpp"
#include "gcal/format.hpp"
#include "gcal/kernels.hpp"
#include "gcal/rng.hpp"

namespace gcal {

void RoundPlan::validate() const {
    if (fractions.empty()) {
        throw std::invalid_argument("round plan: no fractions");
    }
    for (std::size_t r = 0; r < fractions.size(); ++r) {
        if (!(fractions[r] > 0.0 && fractions[r] <= 1.0)) {
            throw std::invalid_argument("round plan: fractions must lie in (0, 1]");
        }
        if (r > 0 && !(fractions[r] > fractions[r - 1])) {
            throw std::invalid_argument("round plan: fractions must be strictly increasing");
        }
    }
    if (n_repeats < 1) {
        throw std::invalid_argument("round plan: n_repeats must be >= 1");
    }
}

std::vector<std::size_t> budgets(const RoundPlan& plan, std::size_t n) {
    plan.validate();
    if (n == 0) {
        throw std::invalid_argument("budgets: empty pool");
    }
    std::vector<std::size_t> out;
    std::size_t prev = 1;
    for (double f : plan.fractions) {
        const auto b = static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 0.5));
        prev = std::max({b, prev, std::size_t{1}});
        out.push_back(prev);
    }
    return out;
}

std::string to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::random: return "random";
        case StrategyKind::coreset_raw: return "coreset_raw";
        case StrategyKind::coreset_learned: return "coreset_learned";
    }
    return "?";
}

StrategyKind parse_strategy_kind(const std::string& name) {
    for (auto k : {StrategyKind::random, StrategyKind::coreset_raw, StrategyKind::coreset_learned}) {
        if (to_string(k) == name) return k;
    }
    throw std::invalid_argument("unknown strategy '" + name + "'");
}

const RoundRecord& RoundReport::find(const std::string& strategy, int repeat, int round) const {
    for (const auto& r : records) {
        if (r.strategy == strategy && r.repeat == repeat && r.round == round) return r;
    }
    throw std::out_of_range("report: no record for " + strategy);
}

double RoundReport::mean_accuracy(const std::string& strategy, int round) const {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : records) {
        if (r.strategy == strategy && r.round == round) {
            sum += r.accuracy;
            ++count;
        }
    }
    if (count == 0) throw std::out_of_range("report: no records for " + strategy);
    return sum / count;
}

std::optional<double> RoundReport::mean_delta(const std::string& strategy, int round) const {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : records) {
        if (r.strategy == strategy && r.round == round && r.delta) {
            sum += *r.delta;
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return sum / count;
}

double probe_accuracy(const Matrix& space, std::span<const std::size_t> labeled, std::span<const int> labels) {
    if (labeled.empty()) {
        throw std::invalid_argument("probe_accuracy: labeled set is empty");
    }
    if (labels.size() != space.rows()) {
        throw std::invalid_argument("probe_accuracy: one label per row required");
    }
    std::vector<char> is_labeled(space.rows(), 0);
    for (std::size_t r : labeled) is_labeled.at(r) = 1;
    std::vector<std::size_t> queries;
    for (std::size_t i = 0; i < space.rows(); ++i) {
        if (!is_labeled[i]) queries.push_back(i);
    }
    if (queries.empty()) {
        return 1.0;
    }
    const auto nearest = kernels::nearest_reference(space, labeled, queries);
    std::size_t correct = 0;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        if (labels[labeled[nearest[q]]] == labels[queries[q]]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(queries.size());
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

RoundReport run_experiment(const DatasetIndex& ds, std::span<const int> labels,
                           const std::vector<StrategySpec>& strategies, const RoundPlan& plan) {
    if (labels.size() != ds.size()) {
        throw std::invalid_argument("run_experiment: labels do not align with the dataset");
    }
    if (strategies.empty()) {
        throw std::invalid_argument("run_experiment: no strategies");
    }
    {
        std::map<std::string, int> seen;
        for (const auto& s : strategies) {
            if (seen[s.label()]++ > 0) {
                throw std::invalid_argument("run_experiment: duplicate strategy name " + s.label());
            }
        }
    }
    RoundReport report;
    report.fractions = plan.fractions;
    report.budgets = budgets(plan, ds.size());
    if (report.budgets.back() > ds.size()) {
        throw std::invalid_argument("run_experiment: budget exceeds pool size");
    }
    const Matrix raw = ds.pixel_matrix();

    for (int rep = 0; rep < plan.n_repeats; ++rep) {
        const std::uint64_t rep_seed = derive_seed(plan.master_seed, static_cast<std::uint64_t>(rep));
        const std::size_t cold_start = seeded_permutation(ds.size(), derive_seed(rep_seed, "cold-start")).front();

        // Learned spaces first so every strategy can be scored in the reference space.
        std::vector<std::optional<Matrix>> spaces(strategies.size());
        std::vector<double> train_seconds(strategies.size(), 0.0);
        const Matrix* reference = nullptr;
        for (std::size_t s = 0; s < strategies.size(); ++s) {
            const auto& spec = strategies[s];
            if (spec.kind != StrategyKind::coreset_learned) continue;
            const auto t0 = std::chrono::steady_clock::now();
            TrainConfig tc = spec.train;
            tc.seed = derive_seed(rep_seed, "encoder:" + spec.label());
            TrainResult trained = train(ds, spec.groups, spec.loss, tc);
            spaces[s] = embed_all(trained.params, ds);
            report.loss_histories.emplace_back(spec.label() + "#" + std::to_string(rep),
                                               std::move(trained.epoch_loss));
            train_seconds[s] = seconds_since(t0);
            if (reference == nullptr) reference = &*spaces[s];
        }

        for (std::size_t s = 0; s < strategies.size(); ++s) {
            const auto& spec = strategies[s];
            const Matrix* space = spec.kind == StrategyKind::coreset_learned ? &*spaces[s]
                                  : spec.kind == StrategyKind::coreset_raw  ? &raw
                                                                            : nullptr;
            const auto order = seeded_permutation(ds.size(), derive_seed(rep_seed, "random:" + spec.label()));
            SelectionState state;
            if (space) state = SelectionState::start(*space, {});
            std::vector<std::size_t> selected;
            for (std::size_t r = 0; r < report.budgets.size(); ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                const std::size_t target = report.budgets[r];
                const std::size_t before = selected.size();
                if (space) {
                    extend_k_center(*space, state, target - before, cold_start);
                    selected = state.labeled;
                } else {
                    selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(target));
                }
                RoundRecord rec;
                rec.strategy = spec.label();
                rec.repeat = rep;
                rec.round = static_cast<int>(r);
                rec.fraction = plan.fractions[r];
                rec.budget = target;
                for (std::size_t row : selected) rec.selected.push_back(ds.slice(row).slice_id);
                if (space) rec.delta = cover_radius(*space, selected);
                if (reference) rec.delta_learned = cover_radius(*reference, selected);
                rec.accuracy = probe_accuracy(raw, selected, labels);
                for (std::size_t k = before; k < selected.size(); ++k) {
                    SelectionEvent ev{spec.label(), rep, static_cast<int>(r), k, ds.slice(selected[k]).slice_id, {}};
                    if (space && std::isfinite(state.trace[k].min_dist)) ev.min_dist = state.trace[k].min_dist;
                    report.trace.push_back(std::move(ev));
                }
                rec.wall_seconds = seconds_since(t0) + (r == 0 ? train_seconds[s] : 0.0);
                report.records.push_back(std::move(rec));
            }
        }
    }
    return report;
}

namespace {

nlohmann::json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

std::string report_to_json(const RoundReport& report) {
    nlohmann::json j;
    j["fractions"] = report.fractions;
    j["budgets"] = report.budgets;
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : report.records) {
        recs.push_back({{"strategy", r.strategy},
                        {"repeat", r.repeat},
                        {"round", r.round},
                        {"fraction", r.fraction},
                        {"budget", r.budget},
                        {"selected", r.selected},
                        {"delta", optional_number(r.delta)},
                        {"delta_learned", optional_number(r.delta_learned)},
                        {"accuracy", r.accuracy}});
    }
    j["records"] = std::move(recs);
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [key, losses] : report.loss_histories) hist[key] = losses;
    j["loss_histories"] = std::move(hist);

    // Aggregates per strategy and round, in first-appearance order.
    std::vector<std::string> names;
    for (const auto& r : report.records) {
        if (std::find(names.begin(), names.end(), r.strategy) == names.end()) names.push_back(r.strategy);
    }
    nlohmann::json agg = nlohmann::json::array();
    for (const auto& name : names) {
        for (std::size_t round = 0; round < report.fractions.size(); ++round) {
            agg.push_back({{"strategy", name},
                           {"round", round},
                           {"fraction", report.fractions[round]},
                           {"mean_accuracy", report.mean_accuracy(name, static_cast<int>(round))},
                           {"mean_delta", optional_number(report.mean_delta(name, static_cast<int>(round)))}});
        }
    }
    j["aggregates"] = std::move(agg);
    return j.dump(1) + "\n";
}

std::string summary_csv(const RoundReport& report) {
    std::string out = "strategy,round_fraction,mean_accuracy,mean_delta\n";
    std::vector<std::string> names;
    for (const auto& r : report.records) {
        if (std::find(names.begin(), names.end(), r.strategy) == names.end()) names.push_back(r.strategy);
    }
    for (const auto& name : names) {
        for (std::size_t round = 0; round < report.fractions.size(); ++round) {
            const auto delta = report.mean_delta(name, static_cast<int>(round));
            out += name + "," + format_double(report.fractions[round]) + "," +
                   format_double(report.mean_accuracy(name, static_cast<int>(round))) + "," +
                   (delta ? format_double(*delta) : std::string()) + "\n";
        }
    }
    return out;
}

std::string trace_jsonl(const RoundReport& report) {
    std::string out;
    for (const auto& e : report.trace) {
        nlohmann::json j = {{"strategy", e.strategy}, {"repeat", e.repeat},     {"round", e.round},
                            {"rank", e.rank},         {"slice_id", e.slice_id}, {"min_dist", optional_number(e.min_dist)}};
        out += j.dump() + "\n";
    }
    return out;
}

std::string timings_json(const RoundReport& report) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : report.records) {
        arr.push_back({{"strategy", r.strategy}, {"repeat", r.repeat}, {"round", r.round}, {"wall_seconds", r.wall_seconds}});
    }
    return arr.dump(1) + "\n";
}

}  // namespace gcal
