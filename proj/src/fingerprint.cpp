#include "lida/fingerprint.hpp"

#include <limits>
#include <string>

#include "lida/encoder.hpp"
#include "lida/error.hpp"

namespace lida {

BitPlane decompose(const RgbImage& img, Channel channel, int k) {
    if (k < 0 || k > 7) {
        throw InvalidArgument("bit plane index must be in [0,7], got " + std::to_string(k));
    }
    BitPlane plane;
    plane.index = k;
    plane.channel = channel;
    plane.width = img.width();
    plane.height = img.height();
    plane.bits.resize(static_cast<std::size_t>(img.width()) * img.height());
    const auto& px = img.data();
    const int c = static_cast<int>(channel);
    for (std::size_t i = 0; i < plane.bits.size(); ++i) {
        plane.bits[i] = static_cast<std::uint8_t>((px[i * 3 + c] >> k) & 1u);
    }
    return plane;
}

FingerprintImage extract_fingerprint(const RgbImage& img) {
    constexpr std::uint8_t low_mask = (1u << kFingerprintBits) - 1;
    FingerprintImage fp(img.width(), img.height());
    for (int c = 0; c < 3; ++c) {
        const auto ch = static_cast<Channel>(c);
        for (int r = 0; r < img.height(); ++r) {
            for (int col = 0; col < img.width(); ++col) {
                fp.at(r, col, ch) = (img.at(r, col, ch) & low_mask) != 0 ? 255 : 0;
            }
        }
    }
    return fp;
}

std::vector<Patch> partition(const FingerprintImage& fp, int patch_side) {
    if (patch_side <= 0) {
        throw InvalidArgument("patch side must be positive");
    }
    if (patch_side > fp.width() || patch_side > fp.height()) {
        throw InvalidArgument("patch side " + std::to_string(patch_side) +
                              " exceeds fingerprint dimensions");
    }
    const int rows = fp.height() / patch_side;
    const int cols = fp.width() / patch_side;
    const int row0 = (fp.height() - rows * patch_side) / 2;
    const int col0 = (fp.width() - cols * patch_side) / 2;

    std::vector<Patch> patches;
    patches.reserve(static_cast<std::size_t>(rows) * cols);
    for (int pr = 0; pr < rows; ++pr) {
        for (int pc = 0; pc < cols; ++pc) {
            const int r = row0 + pr * patch_side;
            const int c = col0 + pc * patch_side;
            patches.push_back({r, c, patch_side, fp.crop(r, c, patch_side, patch_side)});
        }
    }
    return patches;
}

std::size_t select_best_patch_index(std::span<const Patch> patches,
                                    std::span<const FeatureVector> db_features,
                                    const Encoder& encoder) {
    if (patches.empty()) {
        throw PreconditionViolation("select_best_patch: no patches");
    }
    if (db_features.empty()) {
        throw PreconditionViolation("select_best_patch: empty database");
    }
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const FeatureVector q = normalize(encoder.encode(patches[i].data));
        double score = -std::numeric_limits<double>::infinity();
        for (const auto& f : db_features) {
            score = std::max(score, cosine_similarity(q, f));
        }
        if (score > best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

const Patch& select_best_patch(std::span<const Patch> patches,
                               std::span<const FeatureVector> db_features,
                               const Encoder& encoder) {
    return patches[select_best_patch_index(patches, db_features, encoder)];
}

}  // namespace lida
