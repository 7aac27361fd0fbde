#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace lida {

enum class Channel : int { R = 0, G = 1, B = 2 };

inline constexpr int kMinImageSide = 32;

// Interleaved 8-bit RGB, row-major. Construction enforces the minimum side.
class RgbImage {
public:
    RgbImage() = default;
    RgbImage(int width, int height);
    RgbImage(int width, int height, std::vector<std::uint8_t> interleaved);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

    std::uint8_t at(int row, int col, Channel c) const noexcept {
        return data_[(static_cast<std::size_t>(row) * width_ + col) * 3 + static_cast<int>(c)];
    }
    std::uint8_t& at(int row, int col, Channel c) noexcept {
        return data_[(static_cast<std::size_t>(row) * width_ + col) * 3 + static_cast<int>(c)];
    }

    const std::vector<std::uint8_t>& data() const noexcept { return data_; }
    std::vector<std::uint8_t>& data() noexcept { return data_; }

    bool operator==(const RgbImage&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

// Planar three-channel map whose samples are exactly 0 or 255.
class FingerprintImage {
public:
    FingerprintImage() = default;
    FingerprintImage(int width, int height);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

    std::uint8_t at(int row, int col, Channel c) const noexcept {
        return data_[plane_offset(c) + static_cast<std::size_t>(row) * width_ + col];
    }
    std::uint8_t& at(int row, int col, Channel c) noexcept {
        return data_[plane_offset(c) + static_cast<std::size_t>(row) * width_ + col];
    }

    // Planar layout: R plane, then G, then B.
    const std::vector<std::uint8_t>& data() const noexcept { return data_; }

    // Copy of the rectangle starting at (row, col).
    FingerprintImage crop(int row, int col, int height, int width) const;
    // Largest centered square of the given side.
    FingerprintImage center_crop(int side) const;

    bool operator==(const FingerprintImage&) const = default;

private:
    std::size_t plane_offset(Channel c) const noexcept {
        return static_cast<std::size_t>(static_cast<int>(c)) * width_ * height_;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

}  // namespace lida
