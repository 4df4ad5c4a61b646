#include "gcal/encoder.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "binary_io.hpp"
#include "gcal/format.hpp"

namespace gcal {

EncoderParams::EncoderParams(Architecture arch) : arch_(std::move(arch)) {
    if (arch_.input_dim == 0 || arch_.rep_dim == 0) {
        throw std::invalid_argument("encoder: input and representation dims must be positive");
    }
    std::vector<std::size_t> dims{arch_.input_dim};
    dims.insert(dims.end(), arch_.hidden.begin(), arch_.hidden.end());
    dims.push_back(arch_.rep_dim);
    std::size_t offset = 0;
    auto add = [&](std::size_t in, std::size_t out, bool relu) {
        if (in == 0 || out == 0) {
            throw std::invalid_argument("encoder: zero-width layer");
        }
        layers_.push_back({in, out, offset, offset + in * out, relu});
        offset += in * out + out;
    };
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        add(dims[l], dims[l + 1], l > 0);
    }
    trunk_layers_ = layers_.size();
    std::size_t prev = arch_.rep_dim;
    for (std::size_t out : arch_.projection) {
        add(prev, out, true);
        prev = out;
    }
    values_.assign(offset, 0.0);
}

EncoderParams EncoderParams::glorot(Architecture arch, std::uint64_t seed) {
    EncoderParams p(std::move(arch));
    Rng rng(seed);
    for (std::size_t l = 0; l < p.layers_.size(); ++l) {
        const auto& s = p.layers_[l];
        const double limit = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
        for (double& w : p.weights(l)) {
            w = rng.uniform(-limit, limit);
        }
    }
    return p;
}

std::span<double> EncoderParams::weights(std::size_t l) {
    return {values_.data() + layers_[l].weight_offset, layers_[l].in * layers_[l].out};
}
std::span<const double> EncoderParams::weights(std::size_t l) const {
    return {values_.data() + layers_[l].weight_offset, layers_[l].in * layers_[l].out};
}
std::span<double> EncoderParams::bias(std::size_t l) {
    return {values_.data() + layers_[l].bias_offset, layers_[l].out};
}
std::span<const double> EncoderParams::bias(std::size_t l) const {
    return {values_.data() + layers_[l].bias_offset, layers_[l].out};
}

namespace {

void layer_forward(const EncoderParams& p, std::size_t l, std::span<const double> x, std::span<double> y,
                   std::vector<double>& act) {
    const auto& s = p.layers()[l];
    act.assign(x.begin(), x.end());
    if (s.relu_input) {
        for (double& a : act) a = std::max(a, 0.0);
    }
    const auto w = p.weights(l);
    const auto b = p.bias(l);
    for (std::size_t o = 0; o < s.out; ++o) {
        const double* row = w.data() + o * s.in;
        double acc = b[o];
        for (std::size_t i = 0; i < s.in; ++i) acc += row[i] * act[i];
        y[o] = acc;
    }
}

}  // namespace

ForwardResult forward(const EncoderParams& params, std::span<const double> pixels) {
    if (pixels.size() != params.architecture().input_dim) {
        throw std::invalid_argument("forward: expected " + std::to_string(params.architecture().input_dim) +
                                    " inputs, got " + std::to_string(pixels.size()));
    }
    std::vector<double> x(pixels.begin(), pixels.end()), y, act;
    ForwardResult out;
    for (std::size_t l = 0; l < params.layers().size(); ++l) {
        y.assign(params.layers()[l].out, 0.0);
        layer_forward(params, l, x, y, act);
        std::swap(x, y);
        if (l + 1 == params.trunk_layers()) out.representation = x;
    }
    out.projection = std::move(x);
    return out;
}

ForwardCache forward_batch(const EncoderParams& params, const Matrix& inputs) {
    if (inputs.cols() != params.architecture().input_dim) {
        throw std::invalid_argument("forward_batch: input width mismatch");
    }
    ForwardCache cache;
    Matrix x = inputs;
    std::vector<double> act;
    for (std::size_t l = 0; l < params.layers().size(); ++l) {
        Matrix y(x.rows(), params.layers()[l].out);
        for (std::size_t r = 0; r < x.rows(); ++r) {
            layer_forward(params, l, x.row(r), y.row(r), act);
        }
        cache.layer_inputs.push_back(std::move(x));
        x = std::move(y);
        if (l + 1 == params.trunk_layers()) cache.representation = x;
    }
    cache.projection = std::move(x);
    return cache;
}

void backward_batch(const EncoderParams& params, const ForwardCache& cache, const Matrix& grad_projection,
                    std::span<double> grad) {
    if (grad.size() != params.parameter_count()) {
        throw std::invalid_argument("backward_batch: gradient buffer size mismatch");
    }
    Matrix gy = grad_projection;
    for (std::size_t l = params.layers().size(); l-- > 0;) {
        const auto& s = params.layers()[l];
        const Matrix& x = cache.layer_inputs[l];
        const auto w = params.weights(l);
        double* gw = grad.data() + s.weight_offset;
        double* gb = grad.data() + s.bias_offset;
        Matrix gx(x.rows(), s.in);
        for (std::size_t r = 0; r < x.rows(); ++r) {
            const auto xr = x.row(r);
            const auto gr = gy.row(r);
            auto gxr = gx.row(r);
            for (std::size_t o = 0; o < s.out; ++o) {
                const double g = gr[o];
                if (g == 0.0) continue;
                gb[o] += g;
                double* gwo = gw + o * s.in;
                const double* wo = w.data() + o * s.in;
                for (std::size_t i = 0; i < s.in; ++i) {
                    const double a = s.relu_input ? std::max(xr[i], 0.0) : xr[i];
                    gwo[i] += g * a;
                    gxr[i] += g * wo[i];
                }
            }
            if (s.relu_input) {
                for (std::size_t i = 0; i < s.in; ++i) {
                    if (xr[i] <= 0.0) gxr[i] = 0.0;
                }
            }
        }
        gy = std::move(gx);
    }
}

void AugmentSpec::validate() const {
    if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) {
        throw std::invalid_argument("augment: flip probability must be in [0, 1]");
    }
    if (!(noise_sigma >= 0.0) || !(scale_jitter >= 0.0 && scale_jitter < 1.0)) {
        throw std::invalid_argument("augment: sigma must be >= 0 and jitter in [0, 1)");
    }
}

std::vector<double> augment(std::span<const double> pixels, int height, int width, const AugmentSpec& spec,
                            Rng& rng) {
    std::vector<double> out(pixels.begin(), pixels.end());
    const bool flip = rng.bernoulli(spec.flip_prob);
    if (flip && height > 0 && width > 1 &&
        static_cast<std::size_t>(height) * static_cast<std::size_t>(width) == out.size()) {
        for (int r = 0; r < height; ++r) {
            std::reverse(out.begin() + r * width, out.begin() + (r + 1) * width);
        }
    }
    const double scale = rng.uniform(1.0 - spec.scale_jitter, 1.0 + spec.scale_jitter);
    for (double& x : out) {
        x = scale * x + spec.noise_sigma * rng.normal();
    }
    return out;
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("train config: learning rate must be positive");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("train config: weight decay must be >= 0");
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_eps > 0.0)) {
        throw std::invalid_argument("train config: invalid ADAM constants");
    }
    augment.validate();
}

std::size_t default_batch_size(const GroupSet& groups) { return tuple_width(groups) == 3 ? 9 : 8; }

Adam::Adam(std::size_t size, const TrainConfig& cfg)
    : lr_(cfg.lr), wd_(cfg.weight_decay), b1_(cfg.beta1), b2_(cfg.beta2), eps_(cfg.adam_eps),
      m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
        v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
        const double update = (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
        params[i] -= lr_ * (update + wd_ * params[i]);
    }
}

Objective contrastive_objective(const EncoderParams& params, const Matrix& views, const LossBatch& meta,
                                const LossConfig& cfg) {
    const ForwardCache cache = forward_batch(params, views);
    LossBatch batch = meta;
    batch.z = cache.projection;
    LossAndGrad lg = loss_grad(batch, cfg);
    Objective out{lg.loss, std::vector<double>(params.parameter_count(), 0.0)};
    backward_batch(params, cache, lg.grad, out.grad);
    return out;
}

TrainResult train(const DatasetIndex& ds, const GroupSet& groups, const LossConfig& loss_cfg,
                  const TrainConfig& train_cfg) {
    train_cfg.validate();
    loss_cfg.validate();
    Architecture arch = train_cfg.arch;
    arch.input_dim = ds.dim();
    TrainResult result{EncoderParams::glorot(arch, derive_seed(train_cfg.seed, "init")), {}};
    Adam adam(result.params.parameter_count(), train_cfg);
    const std::size_t batch_size = train_cfg.batch_size ? train_cfg.batch_size : default_batch_size(groups);
    Rng aug_rng(derive_seed(train_cfg.seed, "augment"));
    std::vector<double> grad(result.params.parameter_count());

    for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        const EpochPlan plan = build_epoch(ds, groups, batch_size,
                                           derive_seed(derive_seed(train_cfg.seed, "sampler"),
                                                       static_cast<std::uint64_t>(epoch)));
        if (plan.batches.empty()) {
            throw std::runtime_error("train: epoch produced no batch (dataset too small for batch size " +
                                     std::to_string(batch_size) + ")");
        }
        double loss_sum = 0.0;
        for (const auto& batch : plan.batches) {
            std::vector<std::size_t> rows;
            for (const auto& t : batch) {
                for (std::int64_t id : t.slice_ids()) rows.push_back(ds.position_of(id));
            }
            const std::size_t n = rows.size();
            Matrix views(2 * n, ds.dim());
            for (std::size_t i = 0; i < n; ++i) {
                const auto& px = ds.slice(rows[i]).pixels;
                std::copy(px.begin(), px.end(), views.row(i).begin());
                const auto aug = augment(px, ds.height(), ds.width(), train_cfg.augment, aug_rng);
                std::copy(aug.begin(), aug.end(), views.row(i + n).begin());
            }
            const Objective obj = contrastive_objective(result.params, views, batch_metadata(ds, rows), loss_cfg);
            if (!std::isfinite(obj.loss)) {
                throw std::runtime_error("train: loss diverged at epoch " + std::to_string(epoch + 1));
            }
            adam.step(result.params.values(), obj.grad);
            loss_sum += obj.loss;
        }
        result.epoch_loss.push_back(loss_sum / static_cast<double>(plan.batches.size()));
    }
    return result;
}

Matrix embed_all(const EncoderParams& params, const DatasetIndex& ds) {
    if (ds.dim() != params.architecture().input_dim) {
        throw std::invalid_argument("embed_all: dataset dim does not match encoder input");
    }
    Matrix out(ds.size(), params.architecture().rep_dim);
    const auto n = static_cast<std::ptrdiff_t>(ds.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto r = forward(params, ds.slice(static_cast<std::size_t>(i)).pixels).representation;
        std::copy(r.begin(), r.end(), out.row(static_cast<std::size_t>(i)).begin());
    }
    return out;
}

std::string architecture_to_json(const Architecture& arch) {
    nlohmann::json j = {{"input_dim", arch.input_dim},
                        {"hidden", arch.hidden},
                        {"rep_dim", arch.rep_dim},
                        {"projection", arch.projection}};
    return j.dump();
}

namespace {
constexpr char kCheckpointMagic[4] = {'G', 'C', 'C', 'K'};
}

void write_checkpoint(const std::filesystem::path& path, const EncoderParams& params,
                      const std::string& header_json) {
    nlohmann::json header = header_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(header_json);
    header["architecture"] = nlohmann::json::parse(architecture_to_json(params.architecture()));
    const std::string text = header.dump();
    std::string out(kCheckpointMagic, 4);
    binio::put_u32(out, 1);
    binio::put_u32(out, static_cast<std::uint32_t>(text.size()));
    out += text;
    binio::put_u32(out, static_cast<std::uint32_t>(params.parameter_count()));
    for (double v : params.values()) binio::put_f32(out, v);
    binio::write_file(path, out);
}

EncoderParams read_checkpoint(const std::filesystem::path& path, std::string* header_json) {
    const std::string in = binio::read_file(path);
    if (in.size() < 12 || in.compare(0, 4, kCheckpointMagic, 4) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path.string());
    }
    if (binio::get_u32(in, 4) != 1) {
        throw std::runtime_error("checkpoint: unsupported version");
    }
    const std::size_t len = binio::get_u32(in, 8);
    if (in.size() < 12 + len + 4) {
        throw std::runtime_error("checkpoint: truncated header");
    }
    const std::string text = in.substr(12, len);
    const auto header = nlohmann::json::parse(text);
    const auto& a = header.at("architecture");
    Architecture arch;
    arch.input_dim = a.at("input_dim").get<std::size_t>();
    arch.hidden = a.at("hidden").get<std::vector<std::size_t>>();
    arch.rep_dim = a.at("rep_dim").get<std::size_t>();
    arch.projection = a.at("projection").get<std::vector<std::size_t>>();
    EncoderParams params(arch);
    const std::size_t count = binio::get_u32(in, 12 + len);
    if (count != params.parameter_count() || in.size() != 16 + len + 4 * count) {
        throw std::runtime_error("checkpoint: parameter blob does not match architecture");
    }
    for (std::size_t i = 0; i < count; ++i) {
        params.values()[i] = binio::get_f32(in, 16 + len + 4 * i);
        if (!std::isfinite(params.values()[i])) {
            throw std::runtime_error("checkpoint: non-finite parameter");
        }
    }
    if (header_json) *header_json = text;
    return params;
}

void write_loss_history(const std::filesystem::path& path, std::span<const double> epoch_loss) {
    std::string out = "epoch,mean_loss\n";
    for (std::size_t e = 0; e < epoch_loss.size(); ++e) {
        out += std::to_string(e + 1) + "," + format_double(epoch_loss[e]) + "\n";
    }
    binio::write_file(path, out);
}

}  // namespace gcal
