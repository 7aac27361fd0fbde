#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lida/image.hpp"

namespace lida {

class Encoder;
struct FeatureVector;

struct BitPlane {
    int index = 0;
    Channel channel = Channel::R;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;  // row-major, each 0 or 1

    std::uint8_t at(int row, int col) const noexcept {
        return bits[static_cast<std::size_t>(row) * width + col];
    }
};

// Square region of a fingerprint; origin is relative to the uncropped source.
struct Patch {
    int row = 0;
    int col = 0;
    int side = 0;
    FingerprintImage data;
};

inline constexpr int kDefaultPatchSide = 32;
inline constexpr int kFingerprintBits = 3;

// Bit plane k of one channel: (value >> k) & 1.
BitPlane decompose(const RgbImage& img, Channel channel, int k);

// Low-bit generative fingerprint: 255 where any of bits 0..2 is set, else 0.
FingerprintImage extract_fingerprint(const RgbImage& img);

// Disjoint square tiles covering the center crop of the largest multiple of
// patch_side in each dimension. Row-major order.
std::vector<Patch> partition(const FingerprintImage& fp, int patch_side = kDefaultPatchSide);

// Index of the patch whose normalized encoding has the highest cosine
// similarity to any database feature. Ties go to the lowest index.
std::size_t select_best_patch_index(std::span<const Patch> patches,
                                    std::span<const FeatureVector> db_features,
                                    const Encoder& encoder);

const Patch& select_best_patch(std::span<const Patch> patches,
                               std::span<const FeatureVector> db_features,
                               const Encoder& encoder);

}  // namespace lida
