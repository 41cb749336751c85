#include "netpen/image_io.hpp"

#include <cstdio>
#include <memory>

#include <png.h>

#include "netpen/error.hpp"

namespace netpen {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return f;
}

void write_png_rows(const std::filesystem::path& path, int width, int height, int bit_depth,
                    int color_type, int compression,
                    const std::vector<png_bytep>& rows) {
  auto f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "libpng init failed for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "PNG encode failed for " + path.string());
  }
  png_init_io(png, f.get());
  png_set_compression_level(png, compression);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);  // host little-endian samples
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

template <typename Fn>
void read_png_impl(const std::filesystem::path& path, Fn&& on_header) {
  auto f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::IoError, "libpng init failed for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::IoError, "PNG decode failed for " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  std::vector<png_bytep> rows;
  try {
    rows = on_header(width, height, bit_depth, color_type);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
}

}  // namespace

void write_png(const std::filesystem::path& path, const RgbImage& img, int compression) {
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int v = 0; v < img.height; ++v)
    rows[v] = const_cast<png_bytep>(img.pixel(0, v));
  write_png_rows(path, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, compression, rows);
}

RgbImage read_png(const std::filesystem::path& path) {
  RgbImage img;
  read_png_impl(path, [&](int w, int h, int depth, int color) {
    if (depth != 8 || color != PNG_COLOR_TYPE_RGB)
      throw Error(ErrorCode::IoError, "expected 8-bit RGB PNG: " + path.string());
    img = RgbImage(w, h);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int v = 0; v < h; ++v) rows[v] = img.pixel(0, v);
    return rows;
  });
  return img;
}

void write_png16(const std::filesystem::path& path, int width, int height,
                 const std::vector<std::uint16_t>& gray) {
  if (gray.size() != static_cast<std::size_t>(width) * height)
    throw Error(ErrorCode::DimensionMismatch, "pixel count mismatch for " + path.string());
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int v = 0; v < height; ++v)
    rows[v] = reinterpret_cast<png_bytep>(const_cast<std::uint16_t*>(&gray[static_cast<std::size_t>(v) * width]));
  write_png_rows(path, width, height, 16, PNG_COLOR_TYPE_GRAY, 3, rows);
}

std::vector<std::uint16_t> read_png16(const std::filesystem::path& path, int& width, int& height) {
  std::vector<std::uint16_t> out;
  read_png_impl(path, [&](int w, int h, int depth, int color) {
    if (depth != 16 || color != PNG_COLOR_TYPE_GRAY)
      throw Error(ErrorCode::IoError, "expected 16-bit gray PNG: " + path.string());
    width = w;
    height = h;
    out.assign(static_cast<std::size_t>(w) * h, 0);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int v = 0; v < h; ++v) rows[v] = reinterpret_cast<png_bytep>(&out[static_cast<std::size_t>(v) * w]);
    return rows;
  });
  return out;
}

}  // namespace netpen
