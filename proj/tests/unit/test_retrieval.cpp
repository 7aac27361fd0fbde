#include <doctest.h>

#include "lida/error.hpp"
#include "lida/fingerprint.hpp"
#include "lida/retrieval.hpp"
#include "oracles.hpp"

using namespace lida;

namespace {

// Features drawn from a small grid so exact ties are common.
Registry tie_heavy_registry(Rng& rng, int n, int dim) {
    Registry r(dim);
    for (int i = 0; i < n; ++i) {
        FeatureVector f;
        for (int d = 0; d < dim; ++d) f.values.push_back(static_cast<double>(rng.below(3)) - 1.0);
        if (f.norm() == 0.0) f.values[0] = 1.0;
        r.add("g" + std::to_string(rng.below(4)), f, "", 0);
    }
    return r;
}

}  // namespace

TEST_CASE("ranking matches brute force including ties") {
    Rng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(200));
        const auto reg = tie_heavy_registry(rng, n, 3);
        const auto q = FeatureVector{{1.0, static_cast<double>(rng.below(3)) - 1.0, 0.0}};
        const auto expect = oracle::rank(q, reg);
        for (std::size_t k : {std::size_t{1}, std::size_t{5}, static_cast<std::size_t>(n), static_cast<std::size_t>(n + 3)}) {
            const auto got = rank_by_feature(q, reg, k);
            REQUIRE(got.entries.size() == std::min<std::size_t>(k, n));
            for (std::size_t i = 0; i < got.entries.size(); ++i) REQUIRE(got.entries[i] == expect[i]);
        }
    }
}

TEST_CASE("ranking examples") {
    Registry r(2);
    r.add("a", FeatureVector{{1.0, 0.0}}, "", 0);   // id 1
    r.add("b", FeatureVector{{0.0, 1.0}}, "", 0);   // id 2
    r.add("c", FeatureVector{{1.0, 0.0}}, "", 0);   // id 3, ties with 1
    r.add("d", FeatureVector{{-1.0, 0.0}}, "", 0);  // id 4
    const auto res = rank_by_feature(FeatureVector{{2.0, 0.0}}, r, 10);
    REQUIRE(res.entries.size() == 4);
    CHECK(res.entries[0].id == 1);
    CHECK(res.entries[1].id == 3);
    CHECK(res.entries[2].id == 2);
    CHECK(res.entries[3].similarity == -1.0);
    CHECK(res.top_label() == "a");
    CHECK_THROWS_AS(rank_by_feature(FeatureVector{{1.0, 0.0}}, r, 0), InvalidArgument);
    CHECK_THROWS_AS(rank_by_feature(FeatureVector{{1.0, 0.0}}, Registry(2), 1), PreconditionViolation);
    CHECK_THROWS_AS(rank_by_feature(FeatureVector{{1.0, 0.0, 0.0}}, r, 1), IncompatibleEncoder);
    CHECK_THROWS_AS(RankedResult{}.top_label(), PreconditionViolation);
    const auto filtered = rank_by_feature(FeatureVector{{1.0, 0.0}}, r, 10, [](const ExemplarRecord& e) { return e.label != "a"; });
    CHECK(filtered.entries.size() == 3);
    CHECK(filtered.entries[0].id == 3);
}

TEST_CASE("majority label") {
    RankedResult r;
    r.entries = {{1, "x", 0.9}, {2, "y", 0.8}, {3, "y", 0.7}, {4, "x", 0.6}};
    CHECK(majority_label(r) == "x");  // 2-2 tie, x ranks first
    r.entries.push_back({5, "y", 0.5});
    CHECK(majority_label(r) == "y");
}

TEST_CASE("detection verdict boundary") {
    const RealPrototype p{FeatureVector{{1.0, 0.0}}, 1};
    const auto v = detect_feature(FeatureVector{{1.0, 0.0}}, p, 1.0);
    CHECK(v.is_real);  // similarity == threshold counts as real
    CHECK_FALSE(detect_feature(FeatureVector{{0.0, 1.0}}, p).is_real);
    CHECK(detect_feature(FeatureVector{{0.0, 1.0}}, p).threshold == kDefaultDetectionThreshold);
    Encoder enc(EncoderConfig{});
    CHECK_THROWS_AS(detect(FingerprintImage(32, 32), std::nullopt, enc), NotPretrained);
}

TEST_CASE("two-stage attribution") {
    Registry r(2);
    r.add("real", FeatureVector{{1.0, 0.0}}, "", 0);
    r.add("g1", FeatureVector{{0.6, 0.8}}, "", 0);
    r.add("g2", FeatureVector{{-0.6, 0.8}}, "", 0);
    const RealPrototype p{FeatureVector{{1.0, 0.0}}, 1};
    const auto real = two_stage_attribute_feature(FeatureVector{{1.0, 0.01}}, r, p, 0.85, 5);
    CHECK(real.label == "real");
    CHECK(real.verdict.is_real);
    CHECK_FALSE(real.ranking.has_value());
    const auto fake = two_stage_attribute_feature(FeatureVector{{0.7, 0.7}}, r, p, 0.85, 5);
    CHECK(fake.label == "g1");
    REQUIRE(fake.ranking.has_value());
    CHECK(fake.ranking->entries.size() == 2);  // the real exemplar is skipped
    CHECK_THROWS_AS(two_stage_attribute_feature(FeatureVector{{0.7, 0.7}}, r, std::nullopt, 0.85, 5), NotPretrained);
}

TEST_CASE("attribute through the encoder and with patch search") {
    Encoder enc(EncoderConfig{});
    Rng rng(30);
    FingerprintImage fp(64, 64);
    for (int i = 0; i < 64; ++i)
        for (int j = 0; j < 64; ++j)
            for (int c = 0; c < 3; ++c) fp.at(i, j, static_cast<Channel>(c)) = rng.bernoulli(0.4) ? 255 : 0;
    Registry r(64);
    const auto patches = partition(fp, 32);
    r.add("p3", enc.encode(patches[3].data), "", 0);
    r.add("center", enc.encode(fp.center_crop(32)), "", 0);
    CHECK(attribute(fp, r, enc, 1).top_label() == "center");
    const auto res = attribute(fp, r, enc, AttributeOptions{2, 32});
    CHECK(res.top_label() == "p3");
    CHECK(res.entries[0].similarity == doctest::Approx(1.0));
}
