#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cli/cli.hpp"
#include "cli/config.hpp"

using namespace gcal;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out, err;
};

Run invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    Run r;
    r.code = cli::run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("gcal_cli_" + name);
    fs::remove_all(p);
    return p;
}

// Small, fast experiment settings.
const std::vector<std::string> kSmall{"--set", "synth.n_patients=4",  "--set", "synth.slices_per_volume=4",
                                      "--set", "synth.height=3",      "--set", "synth.width=3",
                                      "--set", "train.epochs=1",      "--set", "plan.repeats=1",
                                      "--set", "plan.fractions=0.1,0.3"};

std::vector<std::string> with_small(std::vector<std::string> args) {
    args.insert(args.end(), kSmall.begin(), kSmall.end());
    return args;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with 2") {
    CHECK(invoke({"--no-such-flag"}).code == 2);
    CHECK(invoke({"gen-data", "--out", scratch("noseed").string()}).code == 2);
    CHECK(invoke({"gen-data", "--seed", "1", "--out", scratch("badkey").string(), "--set", "synth.nope=3"}).code == 2);
    CHECK(invoke({"stats", "--seed", "1", "--grouping", "pairs"}).code == 2);
    CHECK(invoke({}).code == 2);
}

TEST_CASE("runtime errors exit with 1") {
    CHECK(invoke({"stats", "--seed", "1", "--data", scratch("absent").string()}).code == 1);
}

TEST_CASE("gen-data is byte reproducible") {
    const auto a = scratch("gen_a"), b = scratch("gen_b");
    REQUIRE(invoke({"gen-data", "--seed", "7", "--out", a.string()}).code == 0);
    REQUIRE(invoke({"gen-data", "--seed", "7", "--out", b.string()}).code == 0);
    CHECK(slurp(a / "data.bin") == slurp(b / "data.bin"));
    CHECK(slurp(a / "meta.json") == slurp(b / "meta.json"));
    CHECK(slurp(a / "labels.json") == slurp(b / "labels.json"));
    CHECK(slurp(a / "data.bin").size() == 480 * 256 * 4);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("train, embed and select") {
    const auto dir = scratch("pipeline");
    REQUIRE(invoke(with_small({"gen-data", "--seed", "3", "--out", (dir / "data").string()})).code == 0);
    const auto t = invoke(with_small({"train-encoder", "--seed", "3", "--data", (dir / "data").string(), "--out",
                                   (dir / "enc").string(), "--dump-epoch", (dir / "epoch.json").string()}));
    REQUIRE(t.code == 0);
    CHECK(fs::exists(dir / "enc" / "encoder.ckpt"));
    CHECK(slurp(dir / "enc" / "loss_history.csv").rfind("epoch,mean_loss\n", 0) == 0);
    CHECK(nlohmann::json::parse(slurp(dir / "epoch.json")).contains("batches"));

    REQUIRE(invoke({"embed", "--data", (dir / "data").string(), "--checkpoint", (dir / "enc" / "encoder.ckpt").string(),
                 "--out", (dir / "e.gcle").string()})
                .code == 0);
    const auto s = invoke({"select", "--seed", "3", "--embeddings", (dir / "e.gcle").string(), "--budget", "5",
                        "--initial", "empty"});
    REQUIRE(s.code == 0);
    std::istringstream lines(s.out);
    std::string line;
    std::vector<nlohmann::json> rows;
    while (std::getline(lines, line)) rows.push_back(nlohmann::json::parse(line));
    REQUIRE(rows.size() == 5);
    CHECK(rows[0]["min_dist"].is_null());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i]["rank"] == i);
        CHECK(rows[i].contains("slice_id"));
        CHECK(rows[i].contains("round"));
    }
    for (std::size_t i = 2; i < rows.size(); ++i)
        CHECK(rows[i]["min_dist"].get<double>() <= rows[i - 1]["min_dist"].get<double>());

    const auto first = rows[0]["slice_id"].get<std::int64_t>();
    const auto more = invoke({"select", "--seed", "3", "--embeddings", (dir / "e.gcle").string(), "--budget", "2",
                           "--initial", std::to_string(first)});
    REQUIRE(more.code == 0);
    CHECK(std::count(more.out.begin(), more.out.end(), '\n') == 2);
    CHECK(invoke({"select", "--seed", "3", "--embeddings", (dir / "e.gcle").string(), "--budget", "999"}).code == 1);
    fs::remove_all(dir);
}

TEST_CASE("run-rounds writes reproducible outputs") {
    const auto a = scratch("rounds_a"), b = scratch("rounds_b");
    REQUIRE(invoke(with_small({"run-rounds", "--seed", "5", "--out", a.string()})).code == 0);
    REQUIRE(invoke(with_small({"run-rounds", "--seed", "5", "--out", b.string(), "--timings",
                            (b / "timings.json").string()}))
                .code == 0);
    // config.txt differs only in the out= line.
    for (const char* f : {"report.json", "summary.csv", "selection_trace.jsonl"}) CHECK(slurp(a / f) == slurp(b / f));
    CHECK_FALSE(fs::exists(a / "timings.json"));
    CHECK(fs::exists(b / "timings.json"));
    const auto report = nlohmann::json::parse(slurp(a / "report.json"));
    CHECK(report.contains("records"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("config file and overrides") {
    const auto dir = scratch("cfg");
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "run.cfg");
        f << "# small run\nseed = 4\nsynth.n_patients = 3\nloss.tau = 0.2\n";
    }
    cli::RunConfig rc;
    rc.load_file(dir / "run.cfg");
    CHECK(rc.seed == 4u);
    CHECK(rc.synth.n_patients == 3);
    CHECK(rc.loss.tau == 0.2);
    rc.set("loss.lambda", "1,0.05,0.35,0");
    CHECK(rc.loss.lambda == std::array<double, 4>{1, 0.05, 0.35, 0});
    CHECK_THROWS_AS(rc.set("loss.lambda", "1,2"), std::invalid_argument);
    CHECK_THROWS_AS(rc.set("no.such.key", "1"), std::invalid_argument);

    // dump() is a complete listing that load_file accepts.
    {
        std::ofstream f(dir / "dump.cfg");
        f << rc.dump();
    }
    cli::RunConfig again;
    again.load_file(dir / "dump.cfg");
    CHECK(again.dump() == rc.dump());

    const auto st = invoke({"stats", "--config", (dir / "run.cfg").string(), "--grouping", "volume"});
    CHECK(st.code == 0);
    CHECK(st.out.rfind("grouping,mean_pairwise_abs_deviation\nvolume,", 0) == 0);
    fs::remove_all(dir);

    const auto pc = invoke({"--print-config"});
    CHECK(pc.code == 0);
    CHECK(pc.out.find("loss.tau = 0.1") != std::string::npos);
    CHECK(pc.out.find("train.lr = 3e-04") != std::string::npos);
}

TEST_CASE("seed is mandatory") {
    cli::RunConfig rc;
    CHECK_THROWS_AS(rc.require_seed(), std::invalid_argument);
}

TEST_CASE("ablate emits one row per loss subset") {
    const auto dir = scratch("ablate");
    // Width-1 batches of eight need eight distinct patients.
    auto args = with_small({"ablate", "--seed", "2", "--groups", "ntxent,patient,volume", "--out", dir.string()});
    args.insert(args.end(), {"--set", "synth.n_patients=9"});
    const auto r = invoke(args);
    REQUIRE(r.code == 0);
    std::istringstream csv(slurp(dir / "ablation.csv"));
    std::string line;
    std::vector<std::string> names;
    std::getline(csv, line);
    CHECK(line == "losses,lambda0,lambda1,lambda2,lambda3,mean_accuracy,mean_delta");
    while (std::getline(csv, line)) names.push_back(line.substr(0, line.find(',')));
    CHECK(names == std::vector<std::string>{"ntxent", "patient", "volume", "ntxent+patient", "ntxent+volume",
                                            "patient+volume", "ntxent+patient+volume"});
    CHECK(slurp(dir / "ablation.csv").find("ntxent+patient+volume,1,0.05,0.35,0,") != std::string::npos);
    CHECK(invoke({"ablate", "--seed", "2", "--groups", "ntxent,organ", "--out", dir.string()}).code == 2);
    fs::remove_all(dir);
}

TEST_CASE("verify passes") {
    const auto r = invoke({"verify"});
    CHECK(r.code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
}

}
