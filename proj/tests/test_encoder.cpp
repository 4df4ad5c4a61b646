#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <json.hpp>
#include <numeric>

#include "gcal/encoder.hpp"
#include "gcal/rng.hpp"
#include "oracles/oracles.hpp"

using namespace gcal;

namespace {

Architecture small_arch(std::size_t input) {
    Architecture a;
    a.input_dim = input;
    a.hidden = {6, 5};
    a.rep_dim = 4;
    a.projection = {3};
    return a;
}

LabeledDataset tiny(std::uint64_t seed, int patients = 2, int slices = 4) {
    SynthSpec s;
    s.n_patients = patients;
    s.volumes_per_patient = 1;
    s.slices_per_volume = slices;
    s.height = 3;
    s.width = 3;
    s.seed = seed;
    return generate_synthetic(s);
}

double norm(const std::vector<double>& v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("zero parameters give zero outputs") {
    EncoderParams p(small_arch(5));
    std::vector<double> x{1, -2, 3, 0.5, 4};
    const auto f = forward(p, x);
    for (double v : f.representation) CHECK(v == 0.0);
    for (double v : f.projection) CHECK(v == 0.0);
    CHECK(f.representation.size() == 4);
    CHECK(f.projection.size() == 3);
}

TEST_CASE("a single identity layer passes the input through") {
    Architecture a;
    a.input_dim = 3;
    a.hidden = {};
    a.rep_dim = 3;
    a.projection = {};
    EncoderParams p(a);
    auto w = p.weights(0);
    for (std::size_t i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
    std::vector<double> x{-1.5, 0.0, 2.25};
    const auto f = forward(p, x);
    CHECK(f.representation == x);
    CHECK(f.projection == x);
}

TEST_CASE("forward matches the matrix-product reference") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto p = EncoderParams::glorot(small_arch(7), s);
        Rng rng(s + 100);
        for (double& b : p.values()) b += 0.1 * rng.normal();
        std::vector<double> x(7);
        for (double& v : x) v = rng.normal();
        const auto got = forward(p, x);
        const auto want = oracle::reference_forward(p, x);
        for (std::size_t i = 0; i < got.representation.size(); ++i)
            CHECK(std::abs(got.representation[i] - want.representation[i]) <= 1e-12);
        for (std::size_t i = 0; i < got.projection.size(); ++i)
            CHECK(std::abs(got.projection[i] - want.projection[i]) <= 1e-12);
    }
}

TEST_CASE("wrong input length is rejected") {
    const auto p = EncoderParams::glorot(small_arch(4), 1);
    CHECK_THROWS(forward(p, std::vector<double>(5, 0.0)));
}

TEST_CASE("glorot initialization bounds") {
    const auto p = EncoderParams::glorot(small_arch(9), 3);
    for (std::size_t l = 0; l < p.layers().size(); ++l) {
        const auto& s = p.layers()[l];
        const double bound = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
        for (double w : p.weights(l)) CHECK(std::abs(w) <= bound);
        for (double b : p.bias(l)) CHECK(b == 0.0);
    }
    CHECK(p == EncoderParams::glorot(small_arch(9), 3));
}

TEST_CASE("embed_all is row-wise forward and follows dataset order") {
    const auto d = tiny(5, 3, 3);
    auto arch = small_arch(d.index.dim());
    const auto p = EncoderParams::glorot(arch, 8);
    const Matrix e = embed_all(p, d.index);
    REQUIRE(e.rows() == d.index.size());
    for (std::size_t i = 0; i < d.index.size(); ++i) {
        const auto f = forward(p, d.index.slice(i).pixels);
        for (std::size_t c = 0; c < e.cols(); ++c) CHECK(e(i, c) == f.representation[c]);
    }
    auto slices = d.index.slices();
    std::reverse(slices.begin(), slices.end());
    const DatasetIndex rev(slices, d.index.height(), d.index.width());
    const Matrix er = embed_all(p, rev);
    for (std::size_t i = 0; i < e.rows(); ++i)
        for (std::size_t c = 0; c < e.cols(); ++c) CHECK(er(e.rows() - 1 - i, c) == e(i, c));

    const Matrix zero = embed_all(EncoderParams(arch), d.index);
    for (double v : zero.data()) CHECK(v == 0.0);
}

TEST_CASE("parameter gradient matches central differences") {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 6; ++s) worst = std::max(worst, oracle::check_encoder_gradient(300 + s).max_rel_error);
    CHECK(worst < 1e-4);
}

TEST_CASE("weight decay alone shrinks parameters every step") {
    TrainConfig cfg;
    cfg.lr = 1e-2;
    cfg.weight_decay = 1e-2;
    std::vector<double> params{1.0, -2.0, 0.5};
    std::vector<double> grad(3, 0.0);
    Adam adam(3, cfg);
    double prev = norm(params);
    for (int i = 0; i < 5; ++i) {
        adam.step(params, grad);
        const double now = norm(params);
        CHECK(now < prev);
        prev = now;
    }
}

TEST_CASE("augmentation follows its settings") {
    std::vector<double> x{1, 2, 3, 4, 5, 6};
    Rng rng(1);
    AugmentSpec none{0.0, 0.0, 0.0};
    CHECK(augment(x, 2, 3, none, rng) == x);
    AugmentSpec flip{1.0, 0.0, 0.0};
    CHECK(augment(x, 2, 3, flip, rng) == std::vector<double>{3, 2, 1, 6, 5, 4});
    AugmentSpec bad{1.5, 0.0, 0.0};
    CHECK_THROWS(bad.validate());
}

TEST_CASE("training is deterministic and finite") {
    const auto d = tiny(2);
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 2;
    tc.arch = small_arch(0);
    tc.seed = 5;
    LossConfig loss;
    loss.lambda = {1, 0, 0, 0};
    const auto a = train(d.index, GroupSet{}, loss, tc);
    const auto b = train(d.index, GroupSet{}, loss, tc);
    CHECK(a.params == b.params);
    CHECK(a.epoch_loss == b.epoch_loss);
    for (double v : a.params.values()) CHECK(std::isfinite(v));
    tc.epochs = 0;
    CHECK_THROWS(train(d.index, GroupSet{}, loss, tc));
}

TEST_CASE("an epoch with no full batch is an error") {
    const auto d = tiny(2);
    TrainConfig tc;
    tc.epochs = 1;
    tc.arch = small_arch(0);
    LossConfig loss;
    loss.lambda = {1, 0, 0, 0};
    CHECK_THROWS_AS(train(d.index, GroupSet{}, loss, tc), std::runtime_error);
}

TEST_CASE("NT-Xent training descends on a tiny dataset") {
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto d = tiny(seed);
        TrainConfig tc;
        tc.epochs = 30;
        tc.batch_size = 2;
        tc.seed = seed;
        LossConfig loss;
        loss.lambda = {1, 0, 0, 0};
        const auto r = train(d.index, GroupSet{}, loss, tc);
        REQUIRE(r.epoch_loss.size() == 30);
        CHECK(r.epoch_loss.back() < r.epoch_loss.front());
    }
}

TEST_CASE("checkpoint round trip stores float32 parameters") {
    const auto path = std::filesystem::temp_directory_path() / "gcal_test_encoder.ckpt";
    const auto p = EncoderParams::glorot(small_arch(6), 4);
    write_checkpoint(path, p, R"({"note":"test"})");
    std::string header;
    const auto back = read_checkpoint(path, &header);
    CHECK(nlohmann::json::parse(header)["note"] == "test");
    CHECK(back.architecture() == p.architecture());
    REQUIRE(back.parameter_count() == p.parameter_count());
    for (std::size_t i = 0; i < p.parameter_count(); ++i)
        CHECK(back.values()[i] == static_cast<double>(static_cast<float>(p.values()[i])));
    std::filesystem::remove(path);
}

}
