#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "lida/encoder.hpp"
#include "lida/error.hpp"
#include "oracles.hpp"

using namespace lida;

TEST_CASE("default config") {
    EncoderConfig cfg;
    CHECK(cfg.input_side == 32);
    REQUIRE(cfg.layers.size() == 3);
    CHECK(cfg.layers[0].out_channels == 8);
    CHECK(cfg.layers[2].out_channels == 32);
    CHECK(cfg.feature_dim == 64);
    CHECK(cfg.lower_layer_count() == 2);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("lower layers must keep stride 1") {
    EncoderConfig cfg;
    cfg.layers[1].stride = 2;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.layers[1].stride = 1;
    cfg.layers[2].stride = 2;
    CHECK_NOTHROW(cfg.validate());
    cfg.layers[0].kernel = 2;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("parameter layout") {
    const auto layout = parameter_layout(EncoderConfig{});
    REQUIRE(layout.size() == 10);
    CHECK(layout[0].second == 8 * 3 * 9);
    CHECK(layout[1].second == 8);
    CHECK(layout[6].second == 64 * 32);
    CHECK(layout[8].second == 3 * 64);
    Encoder e(EncoderConfig{});
    std::size_t total = 0;
    for (const auto& [name, n] : layout) total += n;
    CHECK(e.params().size() == total);
}

TEST_CASE("initialization ranges") {
    EncoderConfig cfg;
    cfg.seed = 9;
    Encoder e(cfg);
    const auto& t = e.params().tensors;
    const double conv0 = std::sqrt(6.0 / (3 * 9));
    for (double v : t[0]) REQUIRE(std::abs(v) <= conv0);
    for (double v : t[1]) REQUIRE(v == 0.0);
    const double lin = 1.0 / std::sqrt(32.0);
    for (double v : t[6]) REQUIRE(std::abs(v) <= lin);
    for (double v : t[7]) REQUIRE(v == 0.0);
    // seeded
    CHECK(Encoder(cfg).params() == e.params());
    cfg.seed = 10;
    CHECK_FALSE(Encoder(cfg).params() == e.params());
}

TEST_CASE("forward matches direct convolution on a 4x4 input") {
    EncoderConfig cfg;
    cfg.input_side = 4;
    cfg.layers = {{2, 3, 1}, {3, 3, 1}};
    cfg.feature_dim = 5;
    cfg.num_pretext_classes = 2;
    cfg.seed = 2;
    Encoder enc(cfg);
    Rng rng(6);
    for (auto& t : enc.params().tensors)
        for (double& v : t) v = rng.uniform(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        const auto in = oracle::random_binary_input(rng, 4);
        const auto tr = enc.forward(in);
        const auto ref = oracle::forward(cfg, enc.params(), in);
        for (int f = 0; f < 5; ++f) CHECK(tr.feature.values[f] == doctest::Approx(ref.feature[f]).epsilon(1e-12));
        for (int j = 0; j < 2; ++j) CHECK(tr.logits[j] == doctest::Approx(ref.logits[j]).epsilon(1e-12));
    }
}

TEST_CASE("forward with a strided top layer matches the oracle") {
    const auto cfg = gradcheck::small_config(4);
    Encoder enc(cfg);
    Rng rng(7);
    const auto in = oracle::random_binary_input(rng, cfg.input_side);
    const auto tr = enc.forward(in);
    const auto ref = oracle::forward(cfg, enc.params(), in);
    CHECK(tr.pre_relu.back().height == 3);
    for (int f = 0; f < cfg.feature_dim; ++f) CHECK(tr.feature.values[f] == doctest::Approx(ref.feature[f]).epsilon(1e-12));
}

TEST_CASE("all-zero fingerprint with zero biases gives a zero feature") {
    Encoder enc(EncoderConfig{});
    const auto f = enc.encode(FingerprintImage(32, 32));
    for (double v : f.values) CHECK(v == 0.0);
    CHECK_THROWS_AS(normalize(f), DegenerateFeature);
}

TEST_CASE("fingerprint input handling") {
    Encoder enc(EncoderConfig{});
    FingerprintImage big(40, 36);
    big.at(20, 21, Channel::R) = 255;
    const auto crop = big.center_crop(32);
    CHECK(enc.encode(big) == enc.encode(crop));
    CHECK_THROWS_AS(enc.encode(FingerprintImage(31, 40)), InvalidArgument);
    const auto in = to_input(crop);
    CHECK(in.channels == 3);
    for (double v : in.data) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("backward matches central differences") {
    for (std::uint64_t s = 1; s <= 5; ++s) CHECK(gradcheck::encoder(s) < 1e-4);
}

TEST_CASE("normalize and cosine") {
    FeatureVector v{{3.0, 4.0}};
    const auto n = normalize(v);
    CHECK(n.values[0] == doctest::Approx(0.6));
    CHECK(n.norm() == doctest::Approx(1.0));
    CHECK(cosine_similarity(v, FeatureVector{{6.0, 8.0}}) == doctest::Approx(1.0));
    CHECK(cosine_similarity(v, FeatureVector{{-4.0, 3.0}}) == doctest::Approx(0.0));
    CHECK(cosine_similarity(v, FeatureVector{{-3.0, -4.0}}) == -1.0);
    CHECK_THROWS_AS(cosine_similarity(v, FeatureVector{{1.0}}), InvalidArgument);
    CHECK_THROWS_AS(normalize(FeatureVector{{0.0, 0.0}}), DegenerateFeature);
    CHECK_THROWS_AS(normalize(FeatureVector{{NAN, 1.0}}), DegenerateFeature);
}

TEST_CASE("params arithmetic") {
    auto a = EncoderParams::zeros(EncoderConfig{});
    CHECK(a.all_finite());
    auto b = a;
    b.tensors[0][0] = 2.0;
    a.add_scaled(b, 0.5);
    CHECK(a.tensors[0][0] == 1.0);
    a.scale(3.0);
    CHECK(a.tensors[0][0] == 3.0);
    a.tensors[1][0] = INFINITY;
    CHECK_FALSE(a.all_finite());
    a.set_zero();
    CHECK(a == EncoderParams::zeros(EncoderConfig{}));
    CHECK_THROWS(Encoder(EncoderConfig{}, EncoderParams{}));
}
