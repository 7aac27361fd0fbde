#include "lida/image_io.hpp"

#include <cstdio>
#include <cstring>
#include <memory>
#include <string>

#include <png.h>

#include "binary_io.hpp"
#include "lida/error.hpp"

namespace lida {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f != nullptr) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
    auto* err = static_cast<std::string*>(png_get_error_ptr(png));
    if (err != nullptr) *err = msg;
    png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

// Only called from read_png/write_png, which keep no objects with
// destructors alive across the setjmp.
RgbImage read_png(std::FILE* f, const std::string& name) {
    std::string err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
    if (png == nullptr) throw IoError("libpng: cannot allocate read struct");
    png_infop info = png_create_info_struct(png);
    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> rows;
    png_uint_32 width = 0, height = 0;
    int bit_depth = 0, color_type = 0;
    volatile bool too_deep = false;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw CorruptFile(Corruption::Malformed, name + ": " + err);
    }
    png_init_io(png, f);
    png_read_info(png, info);
    png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);
    if (bit_depth == 16) {
        too_deep = true;
    } else {
        if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
        if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) {
            // tRNS becomes alpha after expansion; drop it again.
            png_set_tRNS_to_alpha(png);
            png_set_strip_alpha(png);
        }
        png_set_interlace_handling(png);
        png_read_update_info(png, info);
        pixels.resize(static_cast<std::size_t>(width) * height * 3);
        rows.resize(height);
        for (png_uint_32 y = 0; y < height; ++y) rows[y] = &pixels[static_cast<std::size_t>(y) * width * 3];
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (too_deep) throw InvalidArgument(name + ": 16-bit PNG is not supported (low bits would be lost)");
    return RgbImage(static_cast<int>(width), static_cast<int>(height), std::move(pixels));
}

void write_png(std::FILE* f, const std::string& name, int width, int height, const std::uint8_t* interleaved) {
    std::string err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
    if (png == nullptr) throw IoError("libpng: cannot allocate write struct");
    png_infop info = png_create_info_struct(png);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError(name + ": " + err);
    }
    png_init_io(png, f);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
        rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(interleaved + static_cast<std::size_t>(y) * width * 3);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Binary PPM (P6) or PGM (P5), maxval 255, '#' comments allowed in the header.
RgbImage read_pnm(const std::string& bytes, const std::string& name) {
    std::size_t pos = 2;
    const auto next_int = [&]() -> long {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        long v = 0;
        bool any = false;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            v = v * 10 + (bytes[pos++] - '0');
            any = true;
            if (v > 1'000'000) break;
        }
        if (!any) throw CorruptFile(Corruption::Malformed, name + ": bad PNM header");
        return v;
    };
    const bool gray = bytes[1] == '5';
    const long w = next_int(), h = next_int(), maxval = next_int();
    if (maxval != 255) throw InvalidArgument(name + ": only 8-bit PNM (maxval 255) is supported");
    ++pos;  // single whitespace before raster
    const std::size_t channels = gray ? 1 : 3;
    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels;
    if (bytes.size() < pos || bytes.size() - pos < need) {
        throw CorruptFile(Corruption::Truncated, name + ": PNM raster truncated");
    }
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
        for (int c = 0; c < 3; ++c) {
            px[i * 3 + c] = static_cast<std::uint8_t>(bytes[pos + i * channels + (gray ? 0 : c)]);
        }
    }
    return RgbImage(static_cast<int>(w), static_cast<int>(h), std::move(px));
}

std::string lower_ext(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    for (char& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return ext;
}

void write_interleaved(int width, int height, const std::uint8_t* px, const std::filesystem::path& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".ppm") {
        std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
        out.append(reinterpret_cast<const char*>(px), static_cast<std::size_t>(width) * height * 3);
        detail::write_file_atomic(path, out);
        return;
    }
    if (ext != ".png") throw InvalidArgument(path.string() + ": output must be .png or .ppm");
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    write_png(f.get(), path.string(), width, height, px);
}

}  // namespace

RgbImage read_image(const std::filesystem::path& path) {
    const std::string bytes = detail::read_file(path);
    const std::string name = path.string();
    if (bytes.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0) {
        FilePtr f(std::fopen(path.c_str(), "rb"));
        if (!f) throw IoError("cannot open '" + name + "'");
        return read_png(f.get(), name);
    }
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '5')) {
        return read_pnm(bytes, name);
    }
    throw InvalidArgument(name + ": unsupported image format (expected PNG or binary PPM/PGM)");
}

void write_image(const RgbImage& img, const std::filesystem::path& path) {
    write_interleaved(img.width(), img.height(), img.data().data(), path);
}

void write_fingerprint(const FingerprintImage& fp, const std::filesystem::path& path) {
    std::vector<std::uint8_t> px(static_cast<std::size_t>(fp.width()) * fp.height() * 3);
    for (int y = 0; y < fp.height(); ++y) {
        for (int x = 0; x < fp.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                px[(static_cast<std::size_t>(y) * fp.width() + x) * 3 + c] = fp.at(y, x, static_cast<Channel>(c));
            }
        }
    }
    write_interleaved(fp.width(), fp.height(), px.data(), path);
}

}  // namespace lida
