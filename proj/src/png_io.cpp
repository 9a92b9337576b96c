#include "seqcore/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "seqcore/error.hpp"

namespace seqcore::png {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void on_png_error(png_structp, png_const_charp message) { throw FormatError(message); }
void on_png_warning(png_structp, png_const_charp) {}

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

struct Writer {
  png_structp png = nullptr;
  png_infop info = nullptr;
  Writer() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error, on_png_warning);
    if (!png) throw IoError("png_create_write_struct failed");
    info = png_create_info_struct(png);
  }
  ~Writer() { png_destroy_write_struct(&png, &info); }
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;
};

struct Reader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  Reader() {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error, on_png_warning);
    if (!png) throw IoError("png_create_read_struct failed");
    info = png_create_info_struct(png);
  }
  ~Reader() { png_destroy_read_struct(&png, &info, nullptr); }
  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;
};

// Rows are handed to libpng as raw big-endian byte buffers.
void write_rows(const std::filesystem::path& path, std::size_t width, std::size_t height, int bit_depth,
                int color_type, std::span<const Rgb> palette, const std::vector<std::vector<png_byte>>& rows) {
  if (width == 0 || height == 0) throw DimensionError("refusing to write empty PNG " + path.string());
  FilePtr file = open_file(path, "wb");
  Writer w;
  png_init_io(w.png, file.get());
  png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  std::vector<png_color> colors;
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    for (const Rgb& c : palette) colors.push_back({c[0], c[1], c[2]});
    png_set_PLTE(w.png, w.info, colors.data(), static_cast<int>(colors.size()));
  }
  png_write_info(w.png, w.info);
  for (const auto& row : rows) png_write_row(w.png, row.data());
  png_write_end(w.png, nullptr);
  if (std::fflush(file.get()) != 0) throw IoError("write failed: " + path.string());
}

struct Decoded {
  std::size_t width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  std::vector<std::vector<png_byte>> rows;
};

Decoded read_rows(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw FormatError("not a PNG file: " + path.string());
  Reader r;
  png_init_io(r.png, file.get());
  png_set_sig_bytes(r.png, 8);
  png_read_info(r.png, r.info);
  Decoded d;
  d.width = png_get_image_width(r.png, r.info);
  d.height = png_get_image_height(r.png, r.info);
  d.bit_depth = png_get_bit_depth(r.png, r.info);
  d.color_type = png_get_color_type(r.png, r.info);
  if (d.bit_depth < 8) png_set_packing(r.png);
  png_read_update_info(r.png, r.info);
  const std::size_t rowbytes = png_get_rowbytes(r.png, r.info);
  d.rows.assign(d.height, std::vector<png_byte>(rowbytes));
  for (auto& row : d.rows) png_read_row(r.png, row.data(), nullptr);
  png_read_end(r.png, nullptr);
  return d;
}

}  // namespace

void write_gray8(const std::filesystem::path& path, const Grid<std::uint8_t>& pixels) {
  std::vector<std::vector<png_byte>> rows(pixels.height());
  for (std::size_t y = 0; y < pixels.height(); ++y) rows[y].assign(pixels.row(y).begin(), pixels.row(y).end());
  write_rows(path, pixels.width(), pixels.height(), 8, PNG_COLOR_TYPE_GRAY, {}, rows);
}

void write_gray16(const std::filesystem::path& path, const Grid<std::uint16_t>& pixels) {
  std::vector<std::vector<png_byte>> rows(pixels.height(), std::vector<png_byte>(pixels.width() * 2));
  for (std::size_t y = 0; y < pixels.height(); ++y)
    for (std::size_t x = 0; x < pixels.width(); ++x) {
      rows[y][2 * x] = static_cast<png_byte>(pixels(y, x) >> 8);
      rows[y][2 * x + 1] = static_cast<png_byte>(pixels(y, x) & 0xFF);
    }
  write_rows(path, pixels.width(), pixels.height(), 16, PNG_COLOR_TYPE_GRAY, {}, rows);
}

void write_indexed(const std::filesystem::path& path, const Grid<std::uint8_t>& indices, std::span<const Rgb> palette) {
  if (palette.empty() || palette.size() > 256) throw ConfigError("palette must hold 1..256 colors");
  for (std::uint8_t v : indices.values())
    if (v >= palette.size()) throw DimensionError("index " + std::to_string(v) + " outside palette");
  std::vector<std::vector<png_byte>> rows(indices.height());
  for (std::size_t y = 0; y < indices.height(); ++y) rows[y].assign(indices.row(y).begin(), indices.row(y).end());
  write_rows(path, indices.width(), indices.height(), 8, PNG_COLOR_TYPE_PALETTE, palette, rows);
}

void write_rgb(const std::filesystem::path& path, const Grid<Rgb>& pixels) {
  std::vector<std::vector<png_byte>> rows(pixels.height(), std::vector<png_byte>(pixels.width() * 3));
  for (std::size_t y = 0; y < pixels.height(); ++y)
    for (std::size_t x = 0; x < pixels.width(); ++x)
      std::copy(pixels(y, x).begin(), pixels(y, x).end(), rows[y].begin() + static_cast<std::ptrdiff_t>(3 * x));
  write_rows(path, pixels.width(), pixels.height(), 8, PNG_COLOR_TYPE_RGB, {}, rows);
}

Grid<std::uint8_t> read_gray8(const std::filesystem::path& path) {
  Decoded d = read_rows(path);
  if (d.bit_depth != 8 || (d.color_type != PNG_COLOR_TYPE_GRAY && d.color_type != PNG_COLOR_TYPE_PALETTE))
    throw FormatError("expected 8-bit grayscale or paletted PNG: " + path.string());
  Grid<std::uint8_t> out(d.height, d.width);
  for (std::size_t y = 0; y < d.height; ++y) std::copy_n(d.rows[y].begin(), d.width, out.row(y).begin());
  return out;
}

Grid<std::uint16_t> read_gray16(const std::filesystem::path& path) {
  Decoded d = read_rows(path);
  if (d.bit_depth != 16 || d.color_type != PNG_COLOR_TYPE_GRAY)
    throw FormatError("expected 16-bit grayscale PNG: " + path.string());
  Grid<std::uint16_t> out(d.height, d.width);
  for (std::size_t y = 0; y < d.height; ++y)
    for (std::size_t x = 0; x < d.width; ++x)
      out(y, x) = static_cast<std::uint16_t>((d.rows[y][2 * x] << 8) | d.rows[y][2 * x + 1]);
  return out;
}

Grid<std::uint8_t> quantize(const Image& image) {
  Grid<std::uint8_t> out(image.height(), image.width());
  for (std::size_t i = 0; i < image.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image[i], 0.0f, 1.0f) * 255.0f));
  return out;
}

Image dequantize(const Grid<std::uint8_t>& pixels) {
  Image out(pixels.height(), pixels.width());
  for (std::size_t i = 0; i < pixels.size(); ++i) out[i] = static_cast<float>(pixels[i]) / 255.0f;
  return out;
}

}  // namespace seqcore::png
