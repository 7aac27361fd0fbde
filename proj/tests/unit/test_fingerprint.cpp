#include <doctest.h>

#include "lida/encoder.hpp"
#include "lida/error.hpp"
#include "lida/fingerprint.hpp"
#include "lida/rng.hpp"
#include "oracles.hpp"

using namespace lida;

TEST_CASE("fingerprint matches 255*[(v mod 8) != 0] for every byte value") {
    // 256 values spread over a 32x32 image, each channel shifted differently
    RgbImage img(32, 32);
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j)
            for (int c = 0; c < 3; ++c) img.at(i, j, static_cast<Channel>(c)) = static_cast<std::uint8_t>((i * 32 + j + 85 * c) % 256);
    const auto fp = extract_fingerprint(img);
    int mismatches = 0;
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j)
            for (int c = 0; c < 3; ++c) {
                const auto ch = static_cast<Channel>(c);
                mismatches += fp.at(i, j, ch) != oracle::fingerprint_value(img.at(i, j, ch));
            }
    CHECK(mismatches == 0);
}

TEST_CASE("fingerprint examples") {
    RgbImage img(32, 32);
    img.at(0, 0, Channel::R) = 8;    // 0b1000 -> 0
    img.at(0, 0, Channel::G) = 9;    // 0b1001 -> 255
    img.at(0, 0, Channel::B) = 248;  // 0b11111000 -> 0
    img.at(0, 1, Channel::R) = 7;
    const auto fp = extract_fingerprint(img);
    CHECK(fp.at(0, 0, Channel::R) == 0);
    CHECK(fp.at(0, 0, Channel::G) == 255);
    CHECK(fp.at(0, 0, Channel::B) == 0);
    CHECK(fp.at(0, 1, Channel::R) == 255);
    CHECK(fp.width() == 32);
    CHECK(fp.height() == 32);
}

TEST_CASE("fingerprint on random images") {
    Rng rng(3);
    const auto img = oracle::random_image(rng, 100, 100);
    const auto fp = extract_fingerprint(img);
    for (int i = 0; i < 100; ++i)
        for (int j = 0; j < 100; ++j)
            for (int c = 0; c < 3; ++c) {
                const auto ch = static_cast<Channel>(c);
                REQUIRE(fp.at(i, j, ch) == oracle::fingerprint_value(img.at(i, j, ch)));
            }
}

TEST_CASE("fingerprint ignores bits 3..7") {
    Rng rng(4);
    auto a = oracle::random_image(rng, 40, 33);
    auto b = a;
    for (auto& v : b.data()) v = static_cast<std::uint8_t>((v & 7) | (rng.below(32) << 3));
    CHECK(extract_fingerprint(a) == extract_fingerprint(b));
}

TEST_CASE("bit planes reconstruct every channel") {
    Rng rng(5);
    for (int n = 0; n < 5; ++n) {
        const auto img = oracle::random_image(rng, 32 + n, 35);
        for (int c = 0; c < 3; ++c) {
            const auto ch = static_cast<Channel>(c);
            std::vector<int> sum(static_cast<std::size_t>(img.width()) * img.height(), 0);
            for (int k = 0; k < 8; ++k) {
                const auto plane = decompose(img, ch, k);
                CHECK(plane.index == k);
                CHECK(plane.channel == ch);
                for (std::size_t p = 0; p < sum.size(); ++p) {
                    REQUIRE(plane.bits[p] <= 1);
                    sum[p] += plane.bits[p] << k;
                }
            }
            for (int i = 0; i < img.height(); ++i)
                for (int j = 0; j < img.width(); ++j)
                    REQUIRE(sum[static_cast<std::size_t>(i) * img.width() + j] == img.at(i, j, ch));
        }
    }
}

TEST_CASE("decompose examples and errors") {
    RgbImage img(32, 32);
    img.at(2, 3, Channel::G) = 0b10110010;
    CHECK(decompose(img, Channel::G, 1).at(2, 3) == 1);
    CHECK(decompose(img, Channel::G, 0).at(2, 3) == 0);
    CHECK(decompose(img, Channel::G, 7).at(2, 3) == 1);
    CHECK(decompose(img, Channel::R, 7).at(2, 3) == 0);
    CHECK_THROWS_AS(decompose(img, Channel::R, 8), InvalidArgument);
    CHECK_THROWS_AS(decompose(img, Channel::R, -1), InvalidArgument);
}

TEST_CASE("rgb images below the minimum side are rejected") {
    CHECK_THROWS_AS(RgbImage(31, 64), InvalidArgument);
    CHECK_THROWS_AS(RgbImage(32, 32, std::vector<std::uint8_t>(10)), InvalidArgument);
}

TEST_CASE("partition center-crops to a multiple of the patch side") {
    FingerprintImage fp(70, 70);
    fp.at(3, 3, Channel::R) = 255;    // first pixel of the crop
    fp.at(2, 2, Channel::R) = 255;    // outside
    fp.at(66, 66, Channel::B) = 255;  // last pixel of the crop
    const auto patches = partition(fp, 32);
    REQUIRE(patches.size() == 4);
    CHECK(patches[0].row == 3);
    CHECK(patches[0].col == 3);
    CHECK(patches[1].row == 3);
    CHECK(patches[1].col == 35);
    CHECK(patches[2].row == 35);
    CHECK(patches[2].col == 3);
    CHECK(patches[3].row == 35);
    CHECK(patches[3].col == 35);
    for (const auto& p : patches) {
        CHECK(p.side == 32);
        CHECK(p.data.width() == 32);
        CHECK(p.data.height() == 32);
    }
    CHECK(patches[0].data.at(0, 0, Channel::R) == 255);
    CHECK(patches[3].data.at(31, 31, Channel::B) == 255);
    std::size_t lit = 0;
    for (const auto& p : patches)
        for (auto v : p.data.data()) lit += v != 0;
    CHECK(lit == 2);
}

TEST_CASE("partition tiles are disjoint and cover the crop") {
    FingerprintImage fp(100, 64);
    for (int i = 0; i < 64; ++i)
        for (int j = 0; j < 100; ++j) fp.at(i, j, Channel::G) = ((i * 7 + j * 13) % 5 == 0) ? 255 : 0;
    const auto patches = partition(fp, 32);
    REQUIRE(patches.size() == 6);  // 3 across, 2 down
    for (const auto& p : patches)
        for (int i = 0; i < 32; ++i)
            for (int j = 0; j < 32; ++j) REQUIRE(p.data.at(i, j, Channel::G) == fp.at(p.row + i, p.col + j, Channel::G));
    CHECK(patches[0].col == 2);  // (100 - 96) / 2
    CHECK_THROWS_AS(partition(fp, 65), InvalidArgument);
    CHECK_THROWS_AS(partition(fp, 0), InvalidArgument);
    CHECK(partition(fp, 64).size() == 1);
}

TEST_CASE("best patch selection") {
    EncoderConfig cfg;
    cfg.seed = 1;
    Encoder enc(cfg);
    FingerprintImage fp(64, 64);
    Rng rng(8);
    for (int i = 0; i < 64; ++i)
        for (int j = 0; j < 64; ++j)
            for (int c = 0; c < 3; ++c) fp.at(i, j, static_cast<Channel>(c)) = rng.bernoulli(0.5) ? 255 : 0;
    const auto patches = partition(fp, 32);
    // a database holding exactly patch 2's feature selects patch 2
    std::vector<FeatureVector> db{enc.encode(patches[2].data)};
    CHECK(select_best_patch_index(patches, db, enc) == 2);
    CHECK(&select_best_patch(patches, db, enc) == &patches[2]);
    // identical patches tie; lowest index wins
    std::vector<Patch> same{patches[1], patches[1], patches[1]};
    CHECK(select_best_patch_index(same, db, enc) == 0);
    CHECK_THROWS_AS(select_best_patch_index(std::vector<Patch>{}, db, enc), PreconditionViolation);
    CHECK_THROWS_AS(select_best_patch_index(patches, std::vector<FeatureVector>{}, enc), PreconditionViolation);
}

TEST_CASE("fingerprint crop helpers") {
    FingerprintImage fp(10, 8);
    fp.at(4, 5, Channel::B) = 255;
    const auto c = fp.center_crop(4);
    CHECK(c.width() == 4);
    CHECK(c.at(2, 2, Channel::B) == 255);  // offset (2, 3)
    CHECK_THROWS_AS(fp.center_crop(9), InvalidArgument);
    CHECK_THROWS_AS(fp.crop(6, 0, 3, 3), InvalidArgument);
}
