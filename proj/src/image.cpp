#include "voxsketch/image.hpp"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace voxsketch {

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](auto v) { return v != 0; }));
}

namespace {

void write_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

void flush_cb(png_structp) {}

struct ReadCursor {
  const unsigned char* data;
  std::size_t size;
  std::size_t pos;
};

void read_cb(png_structp png, png_bytep out, png_size_t len) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->size) png_error(png, "truncated PNG");
  std::memcpy(out, cur->data + cur->pos, len);
  cur->pos += len;
}

// libpng reports errors by longjmp; unwinding C++ exceptions through its C
// frames is not safe.
thread_local char png_message[256];

[[noreturn]] void error_cb(png_structp png, png_const_charp msg) {
  std::snprintf(png_message, sizeof png_message, "png: %s", msg);
  png_longjmp(png, 1);
}
void warning_cb(png_structp, png_const_charp) {}

std::string encode(int width, int height, int bit_depth, const std::vector<std::uint8_t>& rows,
                   int color_type = PNG_COLOR_TYPE_GRAY) {
  if (width <= 0 || height <= 0) throw Error("png: empty image");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, error_cb, warning_cb);
  png_infop info = png_create_info_struct(png);
  std::string out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(png_message);
  }
  {
    png_set_write_fn(png, &out, write_cb, flush_cb);
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = rows.size() / height;
    for (int y = 0; y < height; ++y)
      png_write_row(png, const_cast<png_bytep>(rows.data() + y * stride));
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

std::string encode_png_gray(int width, int height, const std::vector<std::uint8_t>& gray) {
  if (gray.size() != static_cast<std::size_t>(width) * height) throw Error("png: size mismatch");
  return encode(width, height, 8, gray);
}

std::string encode_png_mask(const Mask& mask) {
  const int stride = (mask.width + 7) / 8;
  std::vector<std::uint8_t> rows(static_cast<std::size_t>(stride) * mask.height, 0);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(x, y)) rows[y * stride + x / 8] |= static_cast<std::uint8_t>(0x80 >> (x % 8));
  return encode(mask.width, mask.height, 1, rows);
}

std::string encode_png_rgba(const RgbaImage& image) {
  if (image.rgba.size() != static_cast<std::size_t>(image.width) * image.height * 4)
    throw Error("png: size mismatch");
  return encode(image.width, image.height, 8, image.rgba, PNG_COLOR_TYPE_RGBA);
}

RgbaImage decode_png(std::string_view bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8))
    throw Error("png: not a PNG stream");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, error_cb, warning_cb);
  png_infop info = png_create_info_struct(png);
  ReadCursor cur{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), 0};
  RgbaImage img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(png_message);
  }
  {
    png_set_read_fn(png, &cur, read_cb);
    png_read_info(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (!(color & PNG_COLOR_MASK_ALPHA) && !png_get_valid(png, info, PNG_INFO_tRNS))
      png_set_filler(png, 0xff, PNG_FILLER_AFTER);
    png_read_update_info(png, info);
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    if (png_get_rowbytes(png, info) != static_cast<std::size_t>(img.width) * 4)
      png_error(png, "unsupported pixel layout");
    img.rgba.resize(static_cast<std::size_t>(img.width) * img.height * 4);
    rows.resize(img.height);
    for (int y = 0; y < img.height; ++y) rows[y] = img.rgba.data() + static_cast<std::size_t>(y) * img.width * 4;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

std::string encode_drawing_png(const LineDrawing& d) {
  std::vector<std::uint8_t> gray(d.data.size());
  for (std::size_t i = 0; i < gray.size(); ++i)
    gray[i] = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - std::clamp(d.data[i], 0.0f, 1.0f))));
  return encode_png_gray(d.width, d.height, gray);
}

LineDrawing decode_drawing_png(std::string_view bytes) {
  const RgbaImage img = decode_png(bytes);
  LineDrawing d(img.width, img.height);
  for (std::size_t i = 0; i < d.data.size(); ++i) {
    const std::uint8_t* p = &img.rgba[i * 4];
    const bool construction = p[0] >= 160 && p[1] <= 96 && p[2] <= 96;
    if (construction) continue;
    const double lum = (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0;
    const double alpha = p[3] / 255.0;
    d.data[i] = static_cast<float>(std::clamp((1.0 - lum) * alpha, 0.0, 1.0));
  }
  return d;
}

Mask decode_mask_png(std::string_view bytes) {
  const RgbaImage img = decode_png(bytes);
  Mask m(img.width, img.height);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = img.rgba[i * 4] >= 128 ? 1 : 0;
  return m;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path);
}

}  // namespace voxsketch
