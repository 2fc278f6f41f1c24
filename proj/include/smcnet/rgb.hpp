#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "smcnet/datacube.hpp"

namespace smcnet {

/// 8-bit RGB image, rows top to bottom, pixels interleaved R, G, B.
struct RgbImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::uint32_t row, std::uint32_t col, int channel) const {
    return pixels[(static_cast<std::size_t>(row) * width + col) * 3 + static_cast<std::size_t>(channel)];
  }
};

/// Min-max scaling of one channel to 0..255; a flat channel maps to 0.
std::vector<std::uint8_t> minmax_quantize(const std::vector<float>& values);

/// Pseudo-RGB view of a cube for image classifiers: one row per virtual channel, one column per
/// fast-time sample; R = Re, G = Im, B = 0, each min-max scaled per sample.
RgbImage pseudo_rgb(const DataCube& cube);

void write_png(const RgbImage& img, const std::filesystem::path& path);
RgbImage read_png(const std::filesystem::path& path);

/// Writes <out_dir>/<cube stem>.png for every manifest entry; returns the number of images.
std::size_t export_rgb(const DatasetManifest& manifest, const std::filesystem::path& out_dir);

}  // namespace smcnet
