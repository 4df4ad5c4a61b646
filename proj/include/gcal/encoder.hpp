#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gcal/dataset.hpp"
#include "gcal/loss.hpp"
#include "gcal/matrix.hpp"
#include "gcal/rng.hpp"
#include "gcal/sampler.hpp"

namespace gcal {

/// MLP trunk input -> hidden... -> representation, plus a projection head
/// representation -> projection... . Hidden layers are ReLU; the
/// representation and projection outputs are linear (the head applies ReLU to
/// the representation on its way in). An empty projection list makes the
/// projection equal to the representation.
struct Architecture {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden{64, 64};
    std::size_t rep_dim = 32;
    std::vector<std::size_t> projection{16};

    bool operator==(const Architecture&) const = default;
};

struct LayerShape {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0;  // out x in, row-major
    std::size_t bias_offset = 0;
    bool relu_input = false;
};

/// All weights and biases in one flat vector, viewed per layer.
class EncoderParams {
public:
    EncoderParams() = default;
    /// Zero-filled parameters.
    explicit EncoderParams(Architecture arch);
    /// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases.
    static EncoderParams glorot(Architecture arch, std::uint64_t seed);

    const Architecture& architecture() const { return arch_; }
    const std::vector<LayerShape>& layers() const { return layers_; }
    std::size_t trunk_layers() const { return trunk_layers_; }
    std::size_t parameter_count() const { return values_.size(); }

    std::span<double> weights(std::size_t layer);
    std::span<const double> weights(std::size_t layer) const;
    std::span<double> bias(std::size_t layer);
    std::span<const double> bias(std::size_t layer) const;

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    bool operator==(const EncoderParams& o) const { return arch_ == o.arch_ && values_ == o.values_; }

private:
    Architecture arch_;
    std::vector<LayerShape> layers_;
    std::size_t trunk_layers_ = 0;
    std::vector<double> values_;
};

struct ForwardResult {
    std::vector<double> representation;
    std::vector<double> projection;
};

ForwardResult forward(const EncoderParams& params, std::span<const double> pixels);

/// Layer inputs kept for the backward pass.
struct ForwardCache {
    std::vector<Matrix> layer_inputs;
    Matrix representation;
    Matrix projection;
};

/// Row-wise forward over a batch; identical arithmetic to forward().
ForwardCache forward_batch(const EncoderParams& params, const Matrix& inputs);

/// Accumulates d loss / d params into grad (flat, same layout as values()).
void backward_batch(const EncoderParams& params, const ForwardCache& cache, const Matrix& grad_projection,
                    std::span<double> grad);

struct AugmentSpec {
    double flip_prob = 0.5;
    double noise_sigma = 0.1;
    double scale_jitter = 0.1;  // intensity scaled by U(1 - j, 1 + j)

    void validate() const;
};

/// One random view of a slice: optional horizontal flip, intensity scaling
/// and additive Gaussian noise.
std::vector<double> augment(std::span<const double> pixels, int height, int width, const AugmentSpec& spec,
                            Rng& rng);

struct TrainConfig {
    double lr = 3e-4;
    double weight_decay = 1e-6;
    int epochs = 100;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 0;  // slices per batch; 0 picks 8, or 9 for width-3 tuples
    Architecture arch;            // input_dim is taken from the dataset
    AugmentSpec augment;
    std::uint64_t seed = 0;

    void validate() const;
};

std::size_t default_batch_size(const GroupSet& groups);

/// ADAM with decoupled weight decay: p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p).
class Adam {
public:
    Adam(std::size_t size, const TrainConfig& cfg);
    void step(std::span<double> params, std::span<const double> grad);
    std::size_t steps() const { return t_; }

private:
    double lr_, wd_, b1_, b2_, eps_;
    std::size_t t_ = 0;
    std::vector<double> m_, v_;
};

struct Objective {
    double loss = 0.0;
    std::vector<double> grad;
};

/// Contrastive loss of a 2N-row view matrix and its parameter gradient.
Objective contrastive_objective(const EncoderParams& params, const Matrix& views, const LossBatch& meta,
                                const LossConfig& cfg);

struct TrainResult {
    EncoderParams params;
    std::vector<double> epoch_loss;  // mean batch loss per epoch
};

/// Trains from Glorot initialization; epoch e uses the sampler seeded by
/// derive_seed(seed, e). Single-threaded and bit-reproducible.
/// Throws std::runtime_error if the loss becomes non-finite or an epoch has
/// no batch.
TrainResult train(const DatasetIndex& ds, const GroupSet& groups, const LossConfig& loss_cfg,
                  const TrainConfig& train_cfg);

/// n x rep_dim matrix of representations (no augmentation).
Matrix embed_all(const EncoderParams& params, const DatasetIndex& ds);

/// Checkpoint: "GCCK", u32 version, u32 header length, JSON header, u32
/// parameter count, float32 LE parameters.
void write_checkpoint(const std::filesystem::path& path, const EncoderParams& params,
                      const std::string& header_json);
EncoderParams read_checkpoint(const std::filesystem::path& path, std::string* header_json = nullptr);

void write_loss_history(const std::filesystem::path& path, std::span<const double> epoch_loss);

std::string architecture_to_json(const Architecture& arch);

}  // namespace gcal
