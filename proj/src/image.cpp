#include "lida/image.hpp"

#include <algorithm>
#include <string>

#include "lida/error.hpp"

namespace lida {

namespace {

void check_rgb_dims(int width, int height) {
    if (width < kMinImageSide || height < kMinImageSide) {
        throw InvalidArgument("RGB image must be at least " + std::to_string(kMinImageSide) + "x" +
                              std::to_string(kMinImageSide) + ", got " + std::to_string(width) + "x" +
                              std::to_string(height));
    }
}

}  // namespace

RgbImage::RgbImage(int width, int height)
    : width_(width), height_(height) {
    check_rgb_dims(width, height);
    data_.assign(static_cast<std::size_t>(width) * height * 3, 0);
}

RgbImage::RgbImage(int width, int height, std::vector<std::uint8_t> interleaved)
    : width_(width), height_(height), data_(std::move(interleaved)) {
    check_rgb_dims(width, height);
    if (data_.size() != static_cast<std::size_t>(width) * height * 3) {
        throw InvalidArgument("pixel buffer size does not match " + std::to_string(width) + "x" +
                              std::to_string(height) + "x3");
    }
}

FingerprintImage::FingerprintImage(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
        throw InvalidArgument("fingerprint dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * height * 3, 0);
}

FingerprintImage FingerprintImage::crop(int row, int col, int height, int width) const {
    if (row < 0 || col < 0 || height <= 0 || width <= 0 || row + height > height_ ||
        col + width > width_) {
        throw InvalidArgument("crop rectangle outside fingerprint");
    }
    FingerprintImage out(width, height);
    for (int c = 0; c < 3; ++c) {
        const auto ch = static_cast<Channel>(c);
        for (int r = 0; r < height; ++r) {
            const auto* src = &data_[plane_offset(ch) + static_cast<std::size_t>(row + r) * width_ + col];
            std::copy_n(src, width, &out.at(r, 0, ch));
        }
    }
    return out;
}

FingerprintImage FingerprintImage::center_crop(int side) const {
    if (side > width_ || side > height_) {
        throw InvalidArgument("center crop side " + std::to_string(side) + " exceeds fingerprint " +
                              std::to_string(width_) + "x" + std::to_string(height_));
    }
    return crop((height_ - side) / 2, (width_ - side) / 2, side, side);
}

}  // namespace lida
