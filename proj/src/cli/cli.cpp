#include "cli/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>
#include <sstream>

#include "../binary_io.hpp"
#include "cli/config.hpp"
#include "gcal/coreset.hpp"
#include "gcal/dataset.hpp"
#include "gcal/encoder.hpp"
#include "gcal/format.hpp"
#include "gcal/gcle.hpp"
#include "gcal/pipeline.hpp"
#include "gcal/sampler.hpp"
#include "oracles/verify.hpp"

namespace gcal::cli {

namespace {

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string data;
    std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_data) {
    cmd->add_option("--config", o.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--set", o.sets, "override one setting, key=value (repeatable)");
    cmd->add_option("--seed", o.seed, "master seed");
    if (with_data) {
        cmd->add_option("--data", o.data, "dataset directory (default: synthetic from config)");
    }
}

RunConfig build_config(const CommonOptions& o) {
    RunConfig cfg;
    cfg.synth = reference_synth_spec(0);
    try {
        if (!o.config_path.empty()) cfg.load_file(o.config_path);
        for (const auto& kv : o.sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (o.seed) cfg.seed = o.seed;
    if (!o.data.empty()) cfg.data = o.data;
    if (!o.out.empty()) cfg.out = o.out;
    return cfg;
}

std::uint64_t seed_of(const RunConfig& cfg) {
    try {
        return cfg.require_seed();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

LabeledDataset load_or_generate(const RunConfig& cfg) {
    if (!cfg.data.empty()) return read_dataset_dir(cfg.data);
    SynthSpec spec = cfg.synth;
    spec.seed = seed_of(cfg);
    return generate_synthetic(spec);
}

std::vector<std::int64_t> parse_ids(const std::string& text) {
    std::vector<std::int64_t> ids;
    if (text.empty() || text == "empty") return ids;
    std::string body = text;
    if (text.front() == '@') body = binio::read_file(text.substr(1));
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::stringstream line(item);
        std::string tok;
        while (line >> tok) ids.push_back(std::stoll(tok));
    }
    return ids;
}

struct AblationTerm {
    std::string name;
    int slot;
};

// Weights for a loss subset: NT-Xent at 1; a lone group loss at 1; the
// tuned multi-group weights where they exist, else equal group weights.
std::array<double, 4> ablation_weights(const std::array<bool, 4>& on) {
    const int groups = on[1] + on[2] + on[3];
    std::array<double, 4> w{on[0] ? 1.0 : 0.0, 0.0, 0.0, 0.0};
    if (groups == 1) {
        for (int i = 1; i < 4; ++i) w[i] = on[i] ? 1.0 : 0.0;
        return w;
    }
    using A = std::array<bool, 4>;
    if (on == A{false, true, true, false}) return {0, 0.5, 0.5, 0};
    if (on == A{false, false, true, true}) return {0, 0, 0.5, 0.5};
    if (on == A{true, true, true, false}) return {1, 0.05, 0.35, 0};
    if (on == A{false, true, true, true}) return {0, 0.33, 0.33, 0.33};
    if (on == A{true, true, true, true}) return {1, 0.05, 0.35, 0.025};
    for (int i = 1; i < 4; ++i) w[i] = on[i] ? 1.0 / groups : 0.0;
    return w;
}

void write_text(const std::string& dir, const std::string& name, const std::string& text) {
    binio::write_file(std::filesystem::path(dir) / name, text);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Group-contrastive metric learning for coreset active learning"};
    app.require_subcommand(0, 1);
    int threads = 0;
    bool print_config = false;
    app.add_option("--threads", threads, "worker threads for parallel kernels");
    app.add_flag("--print-config", print_config, "print every setting with its default and exit");

    CommonOptions gen_o, train_o, embed_o, sel_o, rounds_o, stats_o, ablate_o;

    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset directory");
    add_common(gen, gen_o, false);
    gen->add_option("--out", gen_o.out, "output directory")->required();

    auto* train_cmd = app.add_subcommand("train-encoder", "train the contrastive encoder");
    add_common(train_cmd, train_o, true);
    train_cmd->add_option("--out", train_o.out, "output directory")->required();
    std::string dump_epoch;
    train_cmd->add_option("--dump-epoch", dump_epoch, "write the first epoch plan as JSON");

    auto* embed_cmd = app.add_subcommand("embed", "embed a dataset with a trained encoder");
    add_common(embed_cmd, embed_o, true);
    std::string checkpoint;
    embed_cmd->add_option("--checkpoint", checkpoint, "encoder checkpoint")->required()->check(CLI::ExistingFile);
    embed_cmd->add_option("--out", embed_o.out, "output .gcle file")->required();

    auto* sel = app.add_subcommand("select", "K-Center Greedy selection over a GCLE embedding file");
    add_common(sel, sel_o, false);
    std::string embeddings, initial = "empty", trace_out;
    std::size_t budget = 0;
    sel->add_option("--embeddings", embeddings, "GCLE file")->required()->check(CLI::ExistingFile);
    sel->add_option("--budget", budget, "number of slices to add")->required();
    sel->add_option("--initial", initial, "'empty', comma separated slice ids, or @file");
    sel->add_option("--out", trace_out, "JSONL trace path (default stdout)");

    auto* rounds = app.add_subcommand("run-rounds", "run the active learning rounds");
    add_common(rounds, rounds_o, true);
    rounds->add_option("--out", rounds_o.out, "output directory")->required();
    std::string timings_out;
    rounds->add_option("--timings", timings_out, "write per-round wall times as JSON to this path");

    auto* stats = app.add_subcommand("stats", "within-group mean pairwise absolute deviation");
    add_common(stats, stats_o, true);
    std::string grouping = "all";
    stats->add_option("--grouping", grouping, "dataset|patient|volume|adjacent|all");

    auto* ablate = app.add_subcommand("ablate", "sweep loss combinations");
    add_common(ablate, ablate_o, true);
    ablate->add_option("--out", ablate_o.out, "output directory")->required();
    std::string ablate_terms = "ntxent,patient,volume,slice";
    ablate->add_option("--groups", ablate_terms, "loss terms to combine (ntxent,patient,volume,slice)");

    auto* verify = app.add_subcommand("verify", "run the gradient, 2-approximation and sampler oracles");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return 2;
    }

    if (threads > 0) omp_set_num_threads(threads);

    try {
        if (print_config) {
            CommonOptions none;
            RunConfig cfg = build_config(none);
            out << cfg.dump();
            return 0;
        }
        if (app.get_subcommands().empty()) {
            err << app.help();
            return 2;
        }

        if (gen->parsed()) {
            RunConfig cfg = build_config(gen_o);
            SynthSpec spec = cfg.synth;
            spec.seed = seed_of(cfg);
            write_dataset_dir(cfg.out, generate_synthetic(spec), spec);
            out << "wrote " << cfg.out << "\n";
        } else if (train_cmd->parsed()) {
            RunConfig cfg = build_config(train_o);
            const auto data = load_or_generate(cfg);
            TrainConfig tc = cfg.train;
            tc.seed = derive_seed(seed_of(cfg), "encoder");
            if (!dump_epoch.empty()) {
                const std::size_t m = tc.batch_size ? tc.batch_size : default_batch_size(cfg.groups);
                const auto plan = build_epoch(data.index, cfg.groups, m,
                                              derive_seed(derive_seed(tc.seed, "sampler"), std::uint64_t{0}));
                binio::write_file(dump_epoch, epoch_plan_to_json(plan));
            }
            const auto result = train(data.index, cfg.groups, cfg.loss, tc);
            nlohmann::json header = {{"seed", *cfg.seed}, {"groups", cfg.groups.str()}, {"config", cfg.dump()}};
            write_checkpoint(std::filesystem::path(cfg.out) / "encoder.ckpt", result.params, header.dump());
            write_loss_history(std::filesystem::path(cfg.out) / "loss_history.csv", result.epoch_loss);
            out << "final mean loss " << format_double(result.epoch_loss.back()) << "\n";
        } else if (embed_cmd->parsed()) {
            RunConfig cfg = build_config(embed_o);
            if (cfg.data.empty()) throw UsageError("embed needs --data");
            const auto data = read_dataset_dir(cfg.data);
            const auto params = read_checkpoint(checkpoint);
            const Matrix emb = embed_all(params, data.index);
            std::vector<RowMeta> meta;
            for (const auto& s : data.index.slices()) meta.push_back({s.slice_id, s.patient_id, s.volume_id, s.slice_index});
            write_gcle(cfg.out, emb, meta);
            out << "wrote " << emb.rows() << "x" << emb.cols() << " embeddings to " << cfg.out << "\n";
        } else if (sel->parsed()) {
            RunConfig cfg = build_config(sel_o);
            const auto imported = import_embeddings(embeddings);
            std::vector<std::size_t> init_rows;
            for (auto id : parse_ids(initial)) init_rows.push_back(imported.index.position_of(id));
            std::optional<std::size_t> cold;
            if (cfg.seed && imported.matrix.rows() > 0) {
                cold = seeded_permutation(imported.matrix.rows(), derive_seed(*cfg.seed, "cold-start")).front();
            }
            const auto state = k_center_greedy(imported.matrix, init_rows, budget, cold);
            std::string lines;
            for (std::size_t r = 0; r < state.trace.size(); ++r) {
                const auto& t = state.trace[r];
                nlohmann::json j = {{"round", 0},
                                    {"rank", r},
                                    {"slice_id", imported.index.slice(t.index).slice_id},
                                    {"min_dist", std::isfinite(t.min_dist) ? nlohmann::json(t.min_dist) : nlohmann::json(nullptr)}};
                lines += j.dump() + "\n";
            }
            if (trace_out.empty()) {
                out << lines;
            } else {
                binio::write_file(trace_out, lines);
            }
        } else if (rounds->parsed()) {
            RunConfig cfg = build_config(rounds_o);
            const auto data = load_or_generate(cfg);
            RoundPlan plan = cfg.plan;
            plan.master_seed = seed_of(cfg);
            const auto report = run_experiment(data.index, data.labels, cfg.strategy_specs(), plan);
            write_text(cfg.out, "report.json", report_to_json(report));
            write_text(cfg.out, "summary.csv", summary_csv(report));
            write_text(cfg.out, "selection_trace.jsonl", trace_jsonl(report));
            if (!timings_out.empty()) binio::write_file(timings_out, timings_json(report));
            write_text(cfg.out, "config.txt", cfg.dump());
            out << summary_csv(report);
        } else if (stats->parsed()) {
            RunConfig cfg = build_config(stats_o);
            const auto data = load_or_generate(cfg);
            std::vector<Grouping> which;
            if (grouping == "all") {
                which = {Grouping::dataset, Grouping::patient, Grouping::volume, Grouping::adjacent};
            } else {
                try {
                    which = {parse_grouping(grouping)};
                } catch (const std::invalid_argument& e) {
                    throw UsageError(e.what());
                }
            }
            out << "grouping,mean_pairwise_abs_deviation\n";
            for (auto g : which) out << to_string(g) << "," << format_double(group_deviation(data.index, g)) << "\n";
        } else if (ablate->parsed()) {
            RunConfig cfg = build_config(ablate_o);
            const auto data = load_or_generate(cfg);
            const std::vector<AblationTerm> known{{"ntxent", 0}, {"patient", 1}, {"volume", 2}, {"slice", 3}};
            std::vector<int> slots;
            std::stringstream ss(ablate_terms);
            std::string item;
            while (std::getline(ss, item, ',')) {
                auto it = std::find_if(known.begin(), known.end(), [&](const AblationTerm& t) { return t.name == item; });
                if (it == known.end()) throw UsageError("ablate: unknown loss term '" + item + "'");
                if (std::find(slots.begin(), slots.end(), it->slot) == slots.end()) slots.push_back(it->slot);
            }
            std::sort(slots.begin(), slots.end());
            std::vector<StrategySpec> specs;
            std::vector<std::array<double, 4>> weights;
            // Subsets ordered by size, then lexicographically by term order.
            for (std::size_t size = 1; size <= slots.size(); ++size) {
                for (unsigned mask = 1; mask < (1u << slots.size()); ++mask) {
                    if (static_cast<std::size_t>(__builtin_popcount(mask)) != size) continue;
                    std::array<bool, 4> on{};
                    std::string name;
                    for (std::size_t b = 0; b < slots.size(); ++b) {
                        if (mask & (1u << b)) {
                            on[slots[b]] = true;
                            name += (name.empty() ? "" : "+") + known[slots[b]].name;
                        }
                    }
                    StrategySpec s;
                    s.kind = StrategyKind::coreset_learned;
                    s.name = name;
                    s.loss = cfg.loss;
                    s.loss.lambda = ablation_weights(on);
                    s.groups = GroupSet{on[3], on[2], on[1]};
                    s.train = cfg.train;
                    specs.push_back(s);
                    weights.push_back(s.loss.lambda);
                }
            }
            RoundPlan plan = cfg.plan;
            plan.master_seed = seed_of(cfg);
            const auto report = run_experiment(data.index, data.labels, specs, plan);
            std::vector<int> low_rounds;
            for (std::size_t r = 0; r < plan.fractions.size(); ++r) {
                if (plan.fractions[r] <= 0.05 + 1e-12) low_rounds.push_back(static_cast<int>(r));
            }
            if (low_rounds.empty()) {
                for (std::size_t r = 0; r < plan.fractions.size(); ++r) low_rounds.push_back(static_cast<int>(r));
            }
            std::string csv = "losses,lambda0,lambda1,lambda2,lambda3,mean_accuracy,mean_delta\n";
            for (std::size_t i = 0; i < specs.size(); ++i) {
                double acc = 0.0, delta = 0.0;
                for (int r : low_rounds) {
                    acc += report.mean_accuracy(specs[i].name, r);
                    delta += report.mean_delta(specs[i].name, r).value_or(0.0);
                }
                acc /= static_cast<double>(low_rounds.size());
                delta /= static_cast<double>(low_rounds.size());
                csv += specs[i].name;
                for (double w : weights[i]) csv += "," + format_double(w);
                csv += "," + format_double(acc) + "," + format_double(delta) + "\n";
            }
            write_text(cfg.out, "ablation.csv", csv);
            write_text(cfg.out, "report.json", report_to_json(report));
            out << csv;
        } else if (verify->parsed()) {
            bool ok = true;
            for (const auto& r : oracle::run_verify_suites()) {
                out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
                ok = ok && r.passed;
            }
            return ok ? 0 : 1;
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace gcal::cli
