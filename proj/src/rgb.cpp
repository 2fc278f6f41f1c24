#include "smcnet/rgb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include <png.h>

#include "smcnet/errors.hpp"

namespace smcnet {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

std::vector<std::uint8_t> minmax_quantize(const std::vector<float>& values) {
  std::vector<std::uint8_t> out(values.size(), 0);
  if (values.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) return out;
  const double scale = 255.0 / (hi - lo);
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::clamp(std::lround((values[i] - lo) * scale), 0L, 255L));
  return out;
}

RgbImage pseudo_rgb(const DataCube& cube) {
  cube.validate();
  std::vector<float> re(cube.iq.size()), im(cube.iq.size());
  for (std::size_t i = 0; i < cube.iq.size(); ++i) {
    re[i] = cube.iq[i].real();
    im[i] = cube.iq[i].imag();
  }
  const auto r = minmax_quantize(re);
  const auto g = minmax_quantize(im);
  RgbImage img;
  img.width = cube.fast_time_len;
  img.height = static_cast<std::uint32_t>(cube.channels());
  img.pixels.assign(cube.iq.size() * 3, 0);
  for (std::size_t i = 0; i < cube.iq.size(); ++i) {
    img.pixels[3 * i] = r[i];
    img.pixels[3 * i + 1] = g[i];
  }
  return img;
}

void write_png(const RgbImage& img, const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed encoding PNG " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::uint32_t row = 0; row < img.height; ++row)
    png_write_row(png, img.pixels.data() + static_cast<std::size_t>(row) * img.width * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

RgbImage read_png(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed for " + path.string());
  }
  RgbImage img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed decoding PNG " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string() + " is not an 8-bit RGB PNG");
  }
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  for (std::uint32_t row = 0; row < img.height; ++row)
    png_read_row(png, img.pixels.data() + static_cast<std::size_t>(row) * img.width * 3, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

std::size_t export_rgb(const DatasetManifest& manifest, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::size_t n = 0;
  for (const auto& e : manifest.entries) {
    const auto src = manifest.resolve(e);
    write_png(pseudo_rgb(load_cube(src)), out_dir / (src.stem().string() + ".png"));
    ++n;
  }
  return n;
}

}  // namespace smcnet
