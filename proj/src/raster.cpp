#include "changeqa/raster.hpp"

#include <algorithm>
#include <string>

#include "changeqa/error.hpp"

namespace changeqa {

namespace {

std::size_t checked_area(int width, int height) {
  require(width >= 0 && height >= 0, Errc::shape, "negative raster dimensions");
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

}  // namespace

SemanticMask::SemanticMask(int width, int height, int num_classes, std::vector<std::uint8_t> labels)
    : width_(width), height_(height), num_classes_(num_classes), labels_(std::move(labels)) {
  require(labels_.size() == checked_area(width, height), Errc::shape,
          "label count " + std::to_string(labels_.size()) + " != " + std::to_string(width) + "x" +
              std::to_string(height));
  require(num_classes >= 1 && num_classes <= 256, Errc::schema, "num_classes must be in 1..256");
  for (std::uint8_t v : labels_) {
    require(v < num_classes_, Errc::schema,
            "label " + std::to_string(v) + " >= num_classes " + std::to_string(num_classes_));
  }
}

SemanticMask::SemanticMask(int width, int height, int num_classes, std::uint8_t fill)
    : SemanticMask(width, height, num_classes, std::vector<std::uint8_t>(checked_area(width, height), fill)) {}

void SemanticMask::set(int x, int y, std::uint8_t label) {
  require(label < num_classes_, Errc::schema, "label out of range");
  labels_[index(x, y)] = label;
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  require(bits_.size() == checked_area(width, height), Errc::shape, "bit count does not match dimensions");
  for (auto& b : bits_) b = b != 0 ? 1 : 0;
}

BinaryMask::BinaryMask(int width, int height)
    : width_(width), height_(height), bits_(checked_area(width, height), 0) {}

std::size_t BinaryMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

RgbImage::RgbImage(int width, int height, std::vector<std::uint8_t> samples)
    : width_(width), height_(height), samples_(std::move(samples)) {
  require(samples_.size() == 3 * checked_area(width, height), Errc::shape,
          "sample count does not match width * height * 3");
}

RgbImage::RgbImage(int width, int height)
    : width_(width), height_(height), samples_(3 * checked_area(width, height), 0) {}

void RgbImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  auto* p = &samples_[index(x, y)];
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

DiffMask diff_mask(const SemanticMask& before, const SemanticMask& after) {
  require(before.width() == after.width() && before.height() == after.height(), Errc::shape,
          "mask dimensions differ");
  require(before.num_classes() == after.num_classes(), Errc::schema, "masks declare different class counts");
  const auto a = before.labels();
  const auto b = after.labels();
  std::vector<std::uint8_t> bits(a.size());
  std::transform(a.begin(), a.end(), b.begin(), bits.begin(),
                 [](std::uint8_t l, std::uint8_t r) -> std::uint8_t { return l != r ? 1 : 0; });
  return DiffMask(before.width(), before.height(), std::move(bits));
}

PixelRect expand_rect(const PixelRect& rect, int margin, int width, int height) {
  const int x0 = std::max(0, rect.x0 - margin);
  const int y0 = std::max(0, rect.y0 - margin);
  const int x1 = std::min(width, rect.x0 + rect.w + margin);
  const int y1 = std::min(height, rect.y0 + rect.h + margin);
  return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
}

RgbImage crop(const RgbImage& image, const PixelRect& rect, int margin) {
  require(rect.w > 0 && rect.h > 0, Errc::empty_region, "crop rect has zero area");
  require(margin >= 0, Errc::contract, "negative crop margin");
  require(rect.x0 >= 0 && rect.y0 >= 0 && rect.x0 + rect.w <= image.width() && rect.y0 + rect.h <= image.height(),
          Errc::contract, "crop rect lies outside the image");
  const PixelRect win = expand_rect(rect, margin, image.width(), image.height());
  std::vector<std::uint8_t> out;
  out.reserve(3 * static_cast<std::size_t>(win.area()));
  const auto src = image.samples();
  for (int y = win.y0; y < win.y0 + win.h; ++y) {
    const auto row = src.subspan(3 * (static_cast<std::size_t>(y) * image.width() + win.x0), 3 * static_cast<std::size_t>(win.w));
    out.insert(out.end(), row.begin(), row.end());
  }
  return RgbImage(win.w, win.h, std::move(out));
}

PixelRect bounding_rect(std::span<const Point> points) {
  require(!points.empty(), Errc::contract, "bounding rect of an empty point set");
  int x0 = points.front().x, x1 = x0, y0 = points.front().y, y1 = y0;
  for (const auto& p : points) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

}  // namespace changeqa
