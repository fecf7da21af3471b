#include "patchseg/overlay.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <random>

#include "patchseg/error.hpp"

namespace patchseg {
namespace fs = std::filesystem;

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const fs::path& path, const char* mode) {
    File f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError("cannot open " + path.string());
    return f;
}

void tint(std::uint8_t* px, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    px[0] = static_cast<std::uint8_t>((px[0] + r) / 2);
    px[1] = static_cast<std::uint8_t>((px[1] + g) / 2);
    px[2] = static_cast<std::uint8_t>((px[2] + b) / 2);
}

}  // namespace

void write_png(const fs::path& path, const RgbImage& image) {
    if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3)
        throw ShapeError("RGB buffer does not match image size");
    File file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < image.height; ++y)
        png_write_row(png, image.pixels.data() + static_cast<std::size_t>(y) * image.width * 3);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

RgbImage read_png(const fs::path& path) {
    File file = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng initialisation failed");
    }
    RgbImage image;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed reading " + path.string());
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY || png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    image.width = static_cast<int>(png_get_image_width(png, info));
    image.height = static_cast<int>(png_get_image_height(png, info));
    image.pixels.resize(static_cast<std::size_t>(image.width) * image.height * 3);
    for (int y = 0; y < image.height; ++y)
        png_read_row(png, image.pixels.data() + static_cast<std::size_t>(y) * image.width * 3, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

RgbImage gray_frame(const WindowedStack& windowed, int frame) {
    const auto& v = windowed.values;
    RgbImage img{v.width(), v.height(), {}};
    img.pixels.reserve(v.frame_size() * 3);
    for (float value : v.frame(frame)) {
        const auto g = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
        img.pixels.insert(img.pixels.end(), {g, g, g});
    }
    return img;
}

RgbImage compose_overlay(const PreparedStack& stack, const ScoreVolume& scores, int frame, double threshold) {
    const auto& frames = stack.stack.frames;
    if (!scores.scores.same_shape(frames.depth(), frames.height(), frames.width()))
        throw ShapeError("score volume does not match stack " + stack.stack.stack_id);
    if (frame < 0 || frame >= frames.depth()) throw ArgumentError("frame index out of range");
    const RgbImage base = gray_frame(stack.windowed, frame);
    const int w = base.width, h = base.height;
    RgbImage out{2 * w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(2 * w) * h * 3)};
    const auto pred = scores.scores.frame(frame);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            std::uint8_t* left = &out.pixels[(static_cast<std::size_t>(y) * 2 * w + x) * 3];
            std::uint8_t* right = left + static_cast<std::size_t>(w) * 3;
            std::copy_n(&base.pixels[i * 3], 3, left);
            std::copy_n(&base.pixels[i * 3], 3, right);
            if (pred[i] >= threshold) tint(left, 255, 0, 0);
            if (stack.stack.mask && stack.stack.mask->frame(frame)[i]) tint(right, 0, 255, 0);
        }
    return out;
}

RgbImage compose_heatmap(const WindowedStack& windowed, int frame, std::span<const double> heat) {
    RgbImage img = gray_frame(windowed, frame);
    if (heat.size() * 3 != img.pixels.size()) throw ShapeError("heat map does not match frame size");
    const double peak = heat.empty() ? 0.0 : *std::max_element(heat.begin(), heat.end());
    if (!(peak > 0.0)) return img;
    for (std::size_t i = 0; i < heat.size(); ++i) {
        const double a = std::clamp(heat[i] / peak, 0.0, 1.0);
        std::uint8_t* px = &img.pixels[i * 3];
        px[0] = static_cast<std::uint8_t>(std::lround(px[0] * (1.0 - a)));
        px[1] = static_cast<std::uint8_t>(std::lround(px[1] * (1.0 - a) + 255.0 * a));
        px[2] = static_cast<std::uint8_t>(std::lround(px[2] * (1.0 - a)));
    }
    return img;
}

std::vector<fs::path> render_overlay(const PreparedStack& stack, const ScoreVolume& scores, const fs::path& out_dir,
                                     const OverlayOptions& options) {
    const int depth = stack.stack.depth();
    std::vector<int> frames(static_cast<std::size_t>(depth));
    std::iota(frames.begin(), frames.end(), 0);
    if (options.random_frames > 0 && options.random_frames < depth) {
        std::mt19937_64 rng(options.seed);
        for (int i = 0; i < options.random_frames; ++i)
            std::swap(frames[i], frames[i + static_cast<int>(rng() % static_cast<std::uint64_t>(depth - i))]);
        frames.resize(options.random_frames);
        std::sort(frames.begin(), frames.end());
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    std::vector<fs::path> written;
    for (int f : frames) {
        char name[64];
        std::snprintf(name, sizeof(name), "_f%03d.png", f);
        const fs::path path = out_dir / (stack.stack.stack_id + name);
        write_png(path, compose_overlay(stack, scores, f, options.threshold));
        written.push_back(path);
    }
    return written;
}

}  // namespace patchseg
