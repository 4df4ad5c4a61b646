#include "cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gcal/format.hpp"

namespace gcal::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const auto t = trim(text);
    const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw std::invalid_argument("config: bad value '" + text + "' for " + key);
    }
    return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
    std::vector<T> out;
    for (const auto& item : split(text)) out.push_back(parse_number<T>(key, item));
    return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        if constexpr (std::is_floating_point_v<T>) {
            out += format_double(v[i]);
        } else {
            out += std::to_string(v[i]);
        }
    }
    return out;
}

}  // namespace

SynthSpec reference_synth_spec(std::uint64_t seed) {
    SynthSpec s;
    s.n_patients = 20;
    s.volumes_per_patient = 2;
    s.slices_per_volume = 12;
    s.height = 16;
    s.width = 16;
    s.class_count = 8;
    s.seed = seed;
    return s;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    auto num = [&](auto& field) { field = parse_number<std::remove_reference_t<decltype(field)>>(key, v); };

    if (key == "seed") seed = parse_number<std::uint64_t>(key, v);
    else if (key == "data") data = v;
    else if (key == "out") out = v;
    else if (key == "threads") num(threads);
    else if (key == "synth.n_patients") num(synth.n_patients);
    else if (key == "synth.volumes_per_patient") num(synth.volumes_per_patient);
    else if (key == "synth.slices_per_volume") num(synth.slices_per_volume);
    else if (key == "synth.height") num(synth.height);
    else if (key == "synth.width") num(synth.width);
    else if (key == "synth.class_count") num(synth.class_count);
    else if (key == "synth.patient_scale") num(synth.patient_scale);
    else if (key == "synth.volume_scale") num(synth.volume_scale);
    else if (key == "synth.adjacent_scale") num(synth.adjacent_scale);
    else if (key == "synth.noise_scale") num(synth.noise_scale);
    else if (key == "groups") groups = GroupSet::parse(v);
    else if (key == "loss.tau") num(loss.tau);
    else if (key == "loss.eps_norm") num(loss.eps_norm);
    else if (key == "loss.lambda") {
        const auto l = parse_list<double>(key, v);
        if (l.size() != 4) throw std::invalid_argument("config: loss.lambda needs four weights");
        std::copy(l.begin(), l.end(), loss.lambda.begin());
    }
    else if (key == "train.lr") num(train.lr);
    else if (key == "train.weight_decay") num(train.weight_decay);
    else if (key == "train.epochs") num(train.epochs);
    else if (key == "train.batch_size") num(train.batch_size);
    else if (key == "train.beta1") num(train.beta1);
    else if (key == "train.beta2") num(train.beta2);
    else if (key == "train.adam_eps") num(train.adam_eps);
    else if (key == "arch.hidden") train.arch.hidden = parse_list<std::size_t>(key, v);
    else if (key == "arch.rep_dim") num(train.arch.rep_dim);
    else if (key == "arch.projection") train.arch.projection = parse_list<std::size_t>(key, v);
    else if (key == "aug.flip_prob") num(train.augment.flip_prob);
    else if (key == "aug.noise_sigma") num(train.augment.noise_sigma);
    else if (key == "aug.scale_jitter") num(train.augment.scale_jitter);
    else if (key == "plan.fractions") plan.fractions = parse_list<double>(key, v);
    else if (key == "plan.repeats") num(plan.n_repeats);
    else if (key == "strategies") {
        strategies.clear();
        for (const auto& s : split(v)) strategies.push_back(parse_strategy_kind(s));
    }
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

void RunConfig::load_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not key = value");
        }
        set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

std::string RunConfig::dump() const {
    std::ostringstream o;
    o << "seed = " << (seed ? std::to_string(*seed) : std::string()) << "\n"
      << "data = " << data << "\n"
      << "out = " << out << "\n"
      << "threads = " << threads << "\n"
      << "synth.n_patients = " << synth.n_patients << "\n"
      << "synth.volumes_per_patient = " << synth.volumes_per_patient << "\n"
      << "synth.slices_per_volume = " << synth.slices_per_volume << "\n"
      << "synth.height = " << synth.height << "\n"
      << "synth.width = " << synth.width << "\n"
      << "synth.class_count = " << synth.class_count << "\n"
      << "synth.patient_scale = " << format_double(synth.patient_scale) << "\n"
      << "synth.volume_scale = " << format_double(synth.volume_scale) << "\n"
      << "synth.adjacent_scale = " << format_double(synth.adjacent_scale) << "\n"
      << "synth.noise_scale = " << format_double(synth.noise_scale) << "\n"
      << "groups = " << groups.str() << "\n"
      << "loss.tau = " << format_double(loss.tau) << "\n"
      << "loss.lambda = " << join(std::vector<double>(loss.lambda.begin(), loss.lambda.end())) << "\n"
      << "loss.eps_norm = " << format_double(loss.eps_norm) << "\n"
      << "train.lr = " << format_double(train.lr) << "\n"
      << "train.weight_decay = " << format_double(train.weight_decay) << "\n"
      << "train.epochs = " << train.epochs << "\n"
      << "train.batch_size = " << train.batch_size << "\n"
      << "train.beta1 = " << format_double(train.beta1) << "\n"
      << "train.beta2 = " << format_double(train.beta2) << "\n"
      << "train.adam_eps = " << format_double(train.adam_eps) << "\n"
      << "arch.hidden = " << join(train.arch.hidden) << "\n"
      << "arch.rep_dim = " << train.arch.rep_dim << "\n"
      << "arch.projection = " << join(train.arch.projection) << "\n"
      << "aug.flip_prob = " << format_double(train.augment.flip_prob) << "\n"
      << "aug.noise_sigma = " << format_double(train.augment.noise_sigma) << "\n"
      << "aug.scale_jitter = " << format_double(train.augment.scale_jitter) << "\n"
      << "plan.fractions = " << join(plan.fractions) << "\n"
      << "plan.repeats = " << plan.n_repeats << "\n";
    std::string kinds;
    for (auto k : strategies) kinds += (kinds.empty() ? "" : ",") + to_string(k);
    o << "strategies = " << kinds << "\n";
    return o.str();
}

std::uint64_t RunConfig::require_seed() const {
    if (!seed) throw std::invalid_argument("a seed is required (--seed or seed = ... in the config)");
    return *seed;
}

std::vector<StrategySpec> RunConfig::strategy_specs() const {
    std::vector<StrategySpec> out;
    for (auto k : strategies) {
        StrategySpec s;
        s.kind = k;
        s.groups = groups;
        s.loss = loss;
        s.train = train;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace gcal::cli
