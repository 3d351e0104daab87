#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace changeqa {

/// Crop window in pixel space. Origin is the top-left corner, y grows downward.
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  long long area() const { return static_cast<long long>(w) * h; }
  bool operator==(const PixelRect&) const = default;
};

struct Point {
  int x = 0;
  int y = 0;
  bool operator==(const Point&) const = default;
};

/// Per-pixel class indices for one timestamp, row-major.
class SemanticMask {
 public:
  SemanticMask() = default;
  /// Throws Errc::schema if any label >= num_classes or Errc::shape if the
  /// label count does not match width * height.
  SemanticMask(int width, int height, int num_classes, std::vector<std::uint8_t> labels);
  /// Mask filled with a single class.
  SemanticMask(int width, int height, int num_classes, std::uint8_t fill = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  int num_classes() const { return num_classes_; }
  std::span<const std::uint8_t> labels() const { return labels_; }

  std::uint8_t at(int x, int y) const { return labels_[index(x, y)]; }
  void set(int x, int y, std::uint8_t label);

  bool operator==(const SemanticMask&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  int num_classes_ = 0;
  std::vector<std::uint8_t> labels_;
};

/// Row-major binary raster; one byte per pixel holding 0 or 1.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits);
  BinaryMask(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool value) { bits_[index(x, y)] = value ? 1 : 0; }
  std::size_t popcount() const;

  bool operator==(const BinaryMask&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

using DiffMask = BinaryMask;

/// 8-bit RGB raster, row-major interleaved.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, std::vector<std::uint8_t> samples);
  RgbImage(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return samples_.empty(); }
  std::span<const std::uint8_t> samples() const { return samples_; }

  const std::uint8_t* pixel(int x, int y) const { return &samples_[index(x, y)]; }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  bool operator==(const RgbImage&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x));
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> samples_;
};

/// Pointwise disagreement indicator. Errc::shape on dimension mismatch,
/// Errc::schema when the class counts differ.
DiffMask diff_mask(const SemanticMask& before, const SemanticMask& after);

/// rect grown by margin on every side and clamped to a width x height raster.
PixelRect expand_rect(const PixelRect& rect, int margin, int width, int height);

/// Copies the margin-expanded window. Errc::empty_region for zero-area rects,
/// Errc::contract when rect does not lie inside the image.
RgbImage crop(const RgbImage& image, const PixelRect& rect, int margin = 16);

/// Smallest rect covering all points; points must be nonempty.
PixelRect bounding_rect(std::span<const Point> points);

}  // namespace changeqa
