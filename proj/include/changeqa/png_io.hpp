#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "changeqa/raster.hpp"

namespace changeqa {

/// Raw 8-bit PNG payload. Only bit depth 8, non-palette files decode; other
/// encodings raise Errc::format.
struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> samples;
};

DecodedPng decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(int width, int height, int channels, std::span<const std::uint8_t> samples);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Single-channel mask, pixel value = class index. Values >= num_classes
/// raise Errc::schema; RGB or 16-bit inputs raise Errc::format.
SemanticMask load_mask_png(const std::filesystem::path& path, int num_classes);
void save_mask_png(const std::filesystem::path& path, const SemanticMask& mask);

RgbImage load_image_png(const std::filesystem::path& path);
void save_image_png(const std::filesystem::path& path, const RgbImage& image);

std::vector<std::uint8_t> encode_png(const RgbImage& image);
RgbImage decode_rgb_png(std::span<const std::uint8_t> bytes);

}  // namespace changeqa
