#pragma once

#include <filesystem>

#include "lida/image.hpp"

namespace lida {

// Lossless image files. PNG (8-bit; grayscale replicated to RGB, alpha
// dropped, palettes expanded; 16-bit rejected because truncation would rewrite
// the low bits) and binary PPM/PGM with maxval 255. Format chosen by content
// on read and by extension on write (.png, .ppm).
RgbImage read_image(const std::filesystem::path& path);
void write_image(const RgbImage& img, const std::filesystem::path& path);

// Fingerprints are written as RGB with samples exactly 0 or 255.
void write_fingerprint(const FingerprintImage& fp, const std::filesystem::path& path);

}  // namespace lida
