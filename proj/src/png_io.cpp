#include "changeqa/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "changeqa/error.hpp"

namespace changeqa {

namespace {

// State shared with the libpng callbacks. Trivially destructible on purpose:
// libpng reports errors through longjmp, which must not skip destructors.
struct ReadSource {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t offset;
};

struct ErrorSlot {
  char message[256];
};

void on_error(png_structp png, png_const_charp msg) {
  auto* slot = static_cast<ErrorSlot*>(png_get_error_ptr(png));
  std::snprintf(slot->message, sizeof(slot->message), "%s", msg);
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

void read_from_memory(png_structp png, png_bytep out, png_size_t length) {
  auto* src = static_cast<ReadSource*>(png_get_io_ptr(png));
  if (src->offset + length > src->size) png_error(png, "truncated PNG stream");
  std::memcpy(out, src->data + src->offset, length);
  src->offset += length;
}

void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* sink = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  sink->insert(sink->end(), data, data + length);
}

void flush_noop(png_structp) {}

}  // namespace

DecodedPng decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) fail(Errc::format, "not a PNG stream");

  DecodedPng out;
  ErrorSlot err{};
  ReadSource src{bytes.data(), bytes.size(), 0};
  std::vector<png_bytep> rows;
  int bit_depth = 0;
  int color_type = 0;

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
  if (png == nullptr) fail(Errc::format, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(Errc::format, "png_create_info_struct failed");
  }

  volatile bool rejected = false;
  if (setjmp(png_jmpbuf(png)) != 0) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Errc::format, std::string("libpng: ") + err.message);
  }

  png_set_read_fn(png, &src, read_from_memory);
  png_read_info(png, info);
  bit_depth = png_get_bit_depth(png, info);
  color_type = png_get_color_type(png, info);
  if (bit_depth != 8 || (color_type & PNG_COLOR_MASK_PALETTE) != 0) {
    rejected = true;
  } else {
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    out.samples.resize(stride * static_cast<std::size_t>(out.height));
    rows.resize(static_cast<std::size_t>(out.height));
    for (std::size_t y = 0; y < rows.size(); ++y) rows[y] = out.samples.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);

  if (rejected) {
    fail(Errc::format, "unsupported PNG encoding (bit depth " + std::to_string(bit_depth) + ", color type " +
                           std::to_string(color_type) + "); expected 8-bit gray or RGB");
  }
  return out;
}

std::vector<std::uint8_t> encode_png(int width, int height, int channels, std::span<const std::uint8_t> samples) {
  require(channels == 1 || channels == 3, Errc::contract, "encode_png supports 1 or 3 channels");
  require(width > 0 && height > 0, Errc::contract, "encode_png needs a nonempty raster");
  const std::size_t stride = static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
  require(samples.size() == stride * static_cast<std::size_t>(height), Errc::shape, "sample count mismatch");

  std::vector<std::uint8_t> out;
  ErrorSlot err{};
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (std::size_t y = 0; y < rows.size(); ++y) rows[y] = const_cast<png_bytep>(samples.data() + y * stride);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
  if (png == nullptr) fail(Errc::format, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    fail(Errc::format, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png)) != 0) {
    png_destroy_write_struct(&png, &info);
    fail(Errc::format, std::string("libpng: ") + err.message);
  }
  png_set_write_fn(png, &out, write_to_vector, flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::io, "short write to " + path.string());
}

SemanticMask load_mask_png(const std::filesystem::path& path, int num_classes) {
  DecodedPng png = decode_png(read_file_bytes(path));
  if (png.channels != 1) {
    fail(Errc::format, path.string() + ": mask must be single-channel, got " + std::to_string(png.channels));
  }
  return SemanticMask(png.width, png.height, num_classes, std::move(png.samples));
}

void save_mask_png(const std::filesystem::path& path, const SemanticMask& mask) {
  write_file_bytes(path, encode_png(mask.width(), mask.height(), 1, mask.labels()));
}

RgbImage decode_rgb_png(std::span<const std::uint8_t> bytes) {
  DecodedPng png = decode_png(bytes);
  if (png.channels != 3) fail(Errc::format, "image must be 3-channel RGB, got " + std::to_string(png.channels));
  return RgbImage(png.width, png.height, std::move(png.samples));
}

RgbImage load_image_png(const std::filesystem::path& path) {
  try {
    return decode_rgb_png(read_file_bytes(path));
  } catch (const Error& e) {
    if (e.code() == Errc::format) fail(Errc::format, path.string() + ": " + e.what());
    throw;
  }
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
  return encode_png(image.width(), image.height(), 3, image.samples());
}

void save_image_png(const std::filesystem::path& path, const RgbImage& image) {
  write_file_bytes(path, encode_png(image));
}

}  // namespace changeqa
