#include "oracles/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "gcal/coreset.hpp"

namespace gcal::oracle {

namespace {

double euclid(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

}  // namespace

double brute_group_deviation(const DatasetIndex& ds, Grouping grouping) {
    const auto& sl = ds.slices();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : sl) {
        for (double x : s.pixels) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    }
    auto norm = [&](double x) { return hi > lo ? (x - lo) / (hi - lo) : 0.0; };
    auto pair_dev = [&](std::size_t a, std::size_t b) {
        double s = 0.0;
        for (std::size_t k = 0; k < sl[a].pixels.size(); ++k) s += std::abs(norm(sl[a].pixels[k]) - norm(sl[b].pixels[k]));
        return s / static_cast<double>(sl[a].pixels.size());
    };
    // group key -> (sum, pairs)
    std::map<std::int64_t, std::pair<double, double>> acc;
    for (std::size_t a = 0; a < sl.size(); ++a) {
        for (std::size_t b = a + 1; b < sl.size(); ++b) {
            std::optional<std::int64_t> key;
            switch (grouping) {
                case Grouping::dataset: key = 0; break;
                case Grouping::patient:
                    if (sl[a].patient_id == sl[b].patient_id) key = sl[a].patient_id;
                    break;
                case Grouping::volume:
                    if (sl[a].volume_id == sl[b].volume_id) key = sl[a].volume_id;
                    break;
                case Grouping::adjacent:
                    if (sl[a].volume_id == sl[b].volume_id && std::abs(sl[a].slice_index - sl[b].slice_index) == 1) {
                        key = static_cast<std::int64_t>(a) * static_cast<std::int64_t>(sl.size()) + static_cast<std::int64_t>(b);
                    }
                    break;
            }
            if (key) {
                acc[*key].first += pair_dev(a, b);
                acc[*key].second += 1.0;
            }
        }
    }
    if (acc.empty()) throw std::domain_error("brute_group_deviation: no pairs");
    double total = 0.0;
    for (const auto& [k, v] : acc) total += v.first / v.second;
    return total / static_cast<double>(acc.size());
}

double brute_cosine(std::span<const double> a, std::span<const double> b, double eps) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    return dot / (std::max(std::sqrt(na), eps) * std::max(std::sqrt(nb), eps));
}

double brute_ntxent(const Matrix& z, double tau, double eps) {
    const std::size_t rows = z.rows(), n = rows / 2;
    double total = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const std::size_t pos = i < n ? i + n : i - n;
        double den = 0.0;
        for (std::size_t k = 0; k < rows; ++k) {
            if (k != i) den += std::exp(brute_cosine(z.row(i), z.row(k), eps) / tau);
        }
        total += -std::log(std::exp(brute_cosine(z.row(i), z.row(pos), eps) / tau) / den);
    }
    return total / static_cast<double>(rows);
}

double brute_group_loss(const Matrix& z, const std::function<bool(std::size_t, std::size_t)>& same_group,
                        std::span<const int> patient, double group_size, double tau, double eps,
                        bool exclude_same_patient) {
    const std::size_t rows = z.rows(), n = rows / 2;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < rows; ++j) {
            if (j == i || !same_group(i, j)) continue;
            double den = 0.0;
            for (std::size_t k = 0; k < rows; ++k) {
                const bool keep = k != i && (!exclude_same_patient || same_group(i, k) || patient[k] != patient[i]);
                if (keep) den += std::exp(brute_cosine(z.row(i), z.row(k), eps) / tau);
            }
            total += std::log(std::exp(brute_cosine(z.row(i), z.row(j), eps) / tau) / den);
        }
    }
    return -total / (static_cast<double>(n) * group_size);
}

double brute_combined(const LossBatch& b, const LossConfig& cfg, bool exclude_same_patient) {
    const std::size_t n = b.z.rows() / 2;
    double total = 0.0;
    if (cfg.lambda[0] > 0.0) total += cfg.lambda[0] * brute_ntxent(b.z, cfg.tau, cfg.eps_norm);
    auto partition = [&](const std::vector<int>& labels, double weight) {
        std::set<int> distinct(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
        const double g = static_cast<double>(n) / static_cast<double>(distinct.size());
        total += weight * brute_group_loss(
                              b.z, [&](std::size_t i, std::size_t j) { return labels[i] == labels[j]; }, b.patient, g,
                              cfg.tau, cfg.eps_norm, exclude_same_patient);
    };
    if (cfg.lambda[1] > 0.0) partition(b.patient, cfg.lambda[1]);
    if (cfg.lambda[2] > 0.0) partition(b.volume, cfg.lambda[2]);
    if (cfg.lambda[3] > 0.0) {
        auto in = [&](std::size_t i, std::size_t j) {
            const auto& p = b.slice_positives[i];
            return std::find(p.begin(), p.end(), j) != p.end();
        };
        double g = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double members = 1.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i && in(i, j)) members += 1.0;
            }
            g += members;
        }
        g /= static_cast<double>(n);
        total += cfg.lambda[3] * brute_group_loss(b.z, in, b.patient, g, cfg.tau, cfg.eps_norm, exclude_same_patient);
    }
    return total;
}

LossBatch random_loss_batch(Rng& rng, std::size_t n, std::size_t dim, int n_patients, int n_groups) {
    LossBatch b;
    b.z = Matrix(2 * n, dim);
    for (double& x : b.z.data()) x = rng.normal();
    b.patient.resize(2 * n);
    b.volume.resize(2 * n);
    std::vector<int> index(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const int p = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_patients)));
        const int g = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_groups)));
        b.patient[i] = b.patient[i + n] = p;
        b.volume[i] = b.volume[i + n] = p * n_groups + g;
        index[i] = index[i + n] = static_cast<int>(rng.below(4));
    }
    b.slice_positives.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < 2 * n; ++j) {
            if (j != i && b.volume[j] == b.volume[i] && std::abs(index[i] - index[j]) <= 1) {
                b.slice_positives[i].push_back(j);
            }
        }
    }
    return b;
}

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double step) {
    std::vector<double> work(x.begin(), x.end());
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = work[i];
        work[i] = orig + step;
        const double up = f(work);
        work[i] = orig - step;
        const double down = f(work);
        work[i] = orig;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

double relative_error(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, relative_error(a[i], b[i], floor));
    return worst;
}

ForwardResult reference_forward(const EncoderParams& params, std::span<const double> pixels) {
    std::vector<double> x(pixels.begin(), pixels.end());
    ForwardResult out;
    for (std::size_t l = 0; l < params.layers().size(); ++l) {
        const auto& s = params.layers()[l];
        Matrix w(s.out, s.in, std::vector<double>(params.weights(l).begin(), params.weights(l).end()));
        std::vector<double> h(x);
        if (s.relu_input) {
            for (double& v : h) v = v > 0.0 ? v : 0.0;
        }
        std::vector<double> y(s.out);
        for (std::size_t o = 0; o < s.out; ++o) {
            y[o] = params.bias(l)[o];
            for (std::size_t i = 0; i < s.in; ++i) y[o] += w(o, i) * h[i];
        }
        x = y;
        if (l + 1 == params.trunk_layers()) out.representation = x;
    }
    out.projection = x;
    return out;
}

std::size_t max_batch_count(std::span<const std::size_t> counts, std::size_t per_batch) {
    std::size_t total = 0;
    for (std::size_t c : counts) total += c;
    std::size_t best = 0;
    for (std::size_t b = 1; b * per_batch <= total; ++b) {
        std::size_t usable = 0;
        for (std::size_t c : counts) usable += std::min(c, b);
        if (usable >= per_batch * b) best = b;
    }
    return best;
}

std::optional<std::string> check_epoch(const DatasetIndex& ds, const GroupSet& groups, const EpochPlan& plan) {
    const std::size_t width = 1 + groups.count();
    if (plan.width != width) return "tuple width mismatch";
    if (plan.tuples_built != ds.size()) return "not one tuple per slice";
    std::map<std::int64_t, int> anchors;
    std::map<int, std::size_t> per_patient;
    for (const auto& batch : plan.batches) {
        std::size_t slices = 0;
        std::set<int> patients;
        for (const auto& t : batch) {
            slices += 1 + t.companions.size();
            const auto& a = ds.slice(ds.position_of(t.anchor));
            if (!patients.insert(a.patient_id).second) return "two tuples of one patient in a batch";
            if (++anchors[t.anchor] > 1) return "anchor used twice";
            ++per_patient[a.patient_id];
            if (t.companions.size() != groups.count()) return "wrong companion count";
            std::size_t c = 0;
            for (auto g : {GroupType::slice, GroupType::volume, GroupType::patient}) {
                if (!groups.contains(g)) continue;
                if (t.companions[c].first != g) return "companion order";
                const auto& s = ds.slice(ds.position_of(t.companions[c].second));
                const std::size_t depth = ds.volume_slices().at(a.volume_id).size();
                switch (g) {
                    case GroupType::slice:
                        if (s.volume_id != a.volume_id) return "slice companion from another volume";
                        if (depth > 1 && std::abs(s.slice_index - a.slice_index) != 1) return "slice companion not adjacent";
                        if (depth == 1 && s.slice_id != a.slice_id) return "single-slice fallback";
                        break;
                    case GroupType::volume:
                        if (s.volume_id != a.volume_id || s.slice_id == a.slice_id) return "bad volume companion";
                        break;
                    case GroupType::patient: {
                        if (s.patient_id != a.patient_id || s.slice_id == a.slice_id) return "bad patient companion";
                        const bool other_volume_exists = ds.patient_volumes().at(a.patient_id).size() > 1;
                        if (other_volume_exists && s.volume_id == a.volume_id) return "patient companion not cross-volume";
                        break;
                    }
                }
                ++c;
            }
        }
        if (slices != plan.batch_size) return "batch slice count != M";
    }
    // Batch count must equal the patient-uniqueness optimum.
    std::vector<std::size_t> counts;
    for (const auto& [p, vols] : ds.patient_volumes()) {
        std::size_t c = 0;
        for (int v : vols) c += ds.volume_slices().at(v).size();
        counts.push_back(c);
    }
    if (plan.batches.size() != max_batch_count(counts, plan.batch_size / width)) return "batch count not maximal";
    return std::nullopt;
}

double brute_silhouette(const Matrix& emb, std::span<const int> labels) {
    const std::size_t n = emb.rows();
    std::set<int> clusters(labels.begin(), labels.end());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double a_sum = 0.0;
        std::size_t a_cnt = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && labels[j] == labels[i]) {
                a_sum += euclid(emb.row(i), emb.row(j));
                ++a_cnt;
            }
        }
        if (a_cnt == 0) continue;  // singleton: s = 0
        const double a = a_sum / static_cast<double>(a_cnt);
        double b = std::numeric_limits<double>::infinity();
        for (int c : clusters) {
            if (c == labels[i]) continue;
            double s = 0.0;
            std::size_t cnt = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (labels[j] == c) {
                    s += euclid(emb.row(i), emb.row(j));
                    ++cnt;
                }
            }
            b = std::min(b, s / static_cast<double>(cnt));
        }
        const double m = std::max(a, b);
        total += m > 0.0 ? (b - a) / m : 0.0;
    }
    return total / static_cast<double>(n);
}

double brute_cover_radius(const Matrix& emb, std::span<const std::size_t> labeled) {
    double r = 0.0;
    for (std::size_t i = 0; i < emb.rows(); ++i) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t j : labeled) m = std::min(m, euclid(emb.row(i), emb.row(j)));
        r = std::max(r, m);
    }
    return r;
}

GradientCheck check_loss_gradient(std::uint64_t seed, double step) {
    Rng rng(seed);
    const std::size_t n = 2 + rng.below(5);
    const std::size_t dim = 3 + rng.below(6);
    LossBatch batch = random_loss_batch(rng, n, dim, 2 + static_cast<int>(rng.below(2)), 1 + static_cast<int>(rng.below(3)));
    LossConfig cfg;
    cfg.tau = rng.uniform(0.2, 1.0);
    cfg.lambda = {static_cast<double>(rng.below(2)), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
    const auto analytic = loss_grad(batch, cfg);
    auto f = [&](std::span<const double> x) {
        LossBatch b = batch;
        std::copy(x.begin(), x.end(), b.z.data().begin());
        return brute_combined(b, cfg);
    };
    const auto numeric = central_difference(f, batch.z.data(), step);
    return {max_relative_error(analytic.grad.data(), numeric), numeric.size()};
}

GradientCheck check_encoder_gradient(std::uint64_t seed, double step) {
    Rng rng(seed);
    // 1-batch dataset: 2 patients x 1 volume x 3 slices through the sampler.
    SynthSpec spec;
    spec.n_patients = 2;
    spec.volumes_per_patient = 1;
    spec.slices_per_volume = 3;
    spec.height = 2;
    spec.width = 3;
    spec.seed = rng.bits();
    const auto data = generate_synthetic(spec);
    GroupSet groups;
    groups.volume = true;
    const auto plan = build_epoch(data.index, groups, 4, rng.bits());
    std::vector<std::size_t> rows;
    for (const auto& t : plan.batches.front()) {
        for (auto id : t.slice_ids()) rows.push_back(data.index.position_of(id));
    }
    const std::size_t n = rows.size();
    Matrix views(2 * n, data.index.dim());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& px = data.index.slice(rows[i]).pixels;
        for (std::size_t d = 0; d < px.size(); ++d) {
            views(i, d) = px[d];
            views(i + n, d) = px[d] + 0.3 * rng.normal();
        }
    }
    Architecture arch;
    arch.input_dim = data.index.dim();
    arch.hidden = {5};
    arch.rep_dim = 4;
    arch.projection = {3};
    // Non-zero biases keep projections off the zero-norm clamp, and draws
    // with a ReLU input within 1e-3 of zero are rejected: central differences
    // across a kink do not estimate the derivative.
    EncoderParams params;
    for (int attempt = 0;; ++attempt) {
        params = EncoderParams::glorot(arch, rng.bits());
        for (std::size_t l = 0; l < params.layers().size(); ++l) {
            for (double& b : params.bias(l)) b = rng.uniform(-0.5, 0.5);
        }
        const auto cache = forward_batch(params, views);
        double margin = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < params.layers().size(); ++l) {
            if (!params.layers()[l].relu_input) continue;
            for (double x : cache.layer_inputs[l].data()) margin = std::min(margin, std::abs(x));
        }
        if (margin >= 1e-3 || attempt == 1000) break;
    }
    LossConfig cfg;
    cfg.tau = rng.uniform(0.2, 1.0);
    cfg.lambda = {1.0, rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
    const LossBatch meta = batch_metadata(data.index, rows);
    const auto analytic = contrastive_objective(params, views, meta, cfg);
    auto f = [&](std::span<const double> x) {
        EncoderParams p = params;
        std::copy(x.begin(), x.end(), p.values().begin());
        LossBatch b = meta;
        b.z = Matrix(2 * n, arch.projection.back());
        for (std::size_t r = 0; r < 2 * n; ++r) {
            const auto out = reference_forward(p, views.row(r)).projection;
            std::copy(out.begin(), out.end(), b.z.row(r).begin());
        }
        return brute_combined(b, cfg);
    };
    const auto numeric = central_difference(f, params.values(), step);
    return {max_relative_error(analytic.grad, numeric), numeric.size()};
}

TwoApproxCheck check_two_approx(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = 3 + rng.below(10);  // 3..12
    const std::size_t dim = 1 + rng.below(3);
    Matrix emb(n, dim);
    for (double& x : emb.data()) x = rng.uniform(-1.0, 1.0);
    std::vector<std::size_t> initial;
    const std::size_t n_init = rng.below(3);  // 0..2
    for (std::size_t r : seeded_permutation(n, rng.bits())) {
        if (initial.size() == n_init) break;
        initial.push_back(r);
    }
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(4, n - initial.size()));
    const auto greedy = k_center_greedy(emb, initial, k, rng.below(n));
    const auto opt = brute_force_k_center(emb, initial, k);
    return {brute_cover_radius(emb, greedy.labeled), opt.radius};
}

}  // namespace gcal::oracle
