#include "otomo/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include <fmt/format.h>

namespace otomo::io {
namespace {

constexpr const char* kScaleKey = "otomo-scale";
constexpr const char* kOffsetKey = "otomo-offset";

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return f;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

struct Decoded {
  std::size_t height = 0;
  std::size_t width = 0;
  int channels = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;  // height * width * channels
  double scale = 0.0;
  double offset = 0.0;
  bool has_scale = false;
};

// The setjmp frames below keep only trivially destructible locals; all
// owned storage lives in the caller.
bool decode_into(std::FILE* file, Decoded& out, std::vector<std::uint8_t>& buffer,
                 std::vector<png_bytep>& rows, std::string& error) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
  if (!png) {
    error = "png_create_read_struct failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, file);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.height = png_get_image_height(png, info);
  out.width = png_get_image_width(png, info);
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * out.height);
  rows.resize(out.height);
  for (std::size_t r = 0; r < out.height; ++r) rows[r] = buffer.data() + r * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, info);

  png_textp text = nullptr;
  int n_text = 0;
  png_get_text(png, info, &text, &n_text);
  bool has_scale = false, has_offset = false;
  for (int i = 0; i < n_text; ++i) {
    if (std::strcmp(text[i].key, kScaleKey) == 0) {
      out.scale = std::strtod(text[i].text, nullptr);
      has_scale = true;
    } else if (std::strcmp(text[i].key, kOffsetKey) == 0) {
      out.offset = std::strtod(text[i].text, nullptr);
      has_offset = true;
    }
  }
  out.has_scale = has_scale && has_offset;
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

Decoded decode(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  Decoded out;
  std::vector<std::uint8_t> buffer;
  std::vector<png_bytep> rows;
  std::string error;
  if (!decode_into(file.get(), out, buffer, rows, error)) {
    throw IoError(fmt::format("cannot decode PNG '{}': {}", path.string(), error));
  }
  const std::size_t n = out.height * out.width * static_cast<std::size_t>(out.channels);
  out.samples.resize(n);
  if (out.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      out.samples[i] = static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1]);
    }
  } else {
    std::copy(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(n), out.samples.begin());
  }
  return out;
}

struct EncodeArgs {
  std::size_t height;
  std::size_t width;
  int bit_depth;
  const std::uint8_t* bytes;
  png_text* text;
  int n_text;
};

bool encode_with(void (*setup)(png_structp, void*), void* ctx, const EncodeArgs& args,
                 std::string& error) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
  if (!png) {
    error = "png_create_write_struct failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  setup(png, ctx);
  png_set_IHDR(png, info, static_cast<png_uint_32>(args.width), static_cast<png_uint_32>(args.height),
               args.bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  if (args.n_text > 0) png_set_text(png, info, args.text, args.n_text);
  png_write_info(png, info);
  const std::size_t rowbytes = args.width * static_cast<std::size_t>(args.bit_depth / 8);
  for (std::size_t r = 0; r < args.height; ++r) {
    png_write_row(png, const_cast<png_bytep>(args.bytes + r * rowbytes));
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  return true;
}

void encode(void (*setup)(png_structp, void*), void* ctx, std::size_t height, std::size_t width,
            int bit_depth, const std::vector<std::uint8_t>& bytes,
            std::vector<std::pair<std::string, std::string>> text) {
  std::vector<png_text> chunks(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    chunks[i].compression = PNG_TEXT_COMPRESSION_NONE;
    chunks[i].key = text[i].first.data();
    chunks[i].text = text[i].second.data();
  }
  std::string error;
  const EncodeArgs args{height, width, bit_depth, bytes.data(), chunks.data(),
                        static_cast<int>(chunks.size())};
  if (!encode_with(setup, ctx, args, error)) throw IoError(fmt::format("cannot encode PNG: {}", error));
}

void setup_file(png_structp png, void* ctx) { png_init_io(png, static_cast<std::FILE*>(ctx)); }

std::vector<std::uint8_t> to_bytes8(const Image& img) {
  if (img.is_raw()) return {img.raw_pixels().begin(), img.raw_pixels().end()};
  std::vector<std::uint8_t> bytes(img.size());
  const auto v = img.values();
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(std::clamp(std::round(v[i]), 0.0, 255.0));
  }
  return bytes;
}

void append_to_vector(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void flush_noop(png_structp) {}

void setup_memory(png_structp png, void* ctx) { png_set_write_fn(png, ctx, append_to_vector, flush_noop); }

}  // namespace

Image read_png_gray8(const std::filesystem::path& path, PngReadInfo* info) {
  const Decoded d = decode(path);
  std::vector<std::uint8_t> px(d.height * d.width);
  const int shift = d.bit_depth == 16 ? 8 : 0;
  if (d.channels == 1) {
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(d.samples[i] >> shift);
  } else {
    for (std::size_t i = 0; i < px.size(); ++i) {
      const double r = d.samples[3 * i] >> shift;
      const double g = d.samples[3 * i + 1] >> shift;
      const double b = d.samples[3 * i + 2] >> shift;
      const double y = 0.299 * r + 0.587 * g + 0.114 * b;
      px[i] = static_cast<std::uint8_t>(std::clamp(std::round(y), 0.0, 255.0));
    }
  }
  if (info) {
    info->converted_from_color = d.channels != 1;
    info->source_bit_depth = d.bit_depth;
  }
  return Image::raw(d.height, d.width, std::move(px));
}

void write_png_gray8(const std::filesystem::path& path, const Image& img) {
  FilePtr file = open_file(path, "wb");
  encode(setup_file, file.get(), img.height(), img.width(), 8, to_bytes8(img), {});
}

std::vector<std::uint8_t> encode_png_gray8(const Image& img) {
  std::vector<std::uint8_t> out;
  encode(setup_memory, &out, img.height(), img.width(), 8, to_bytes8(img), {});
  return out;
}

void write_png_scaled16(const std::filesystem::path& path, const Image& img) {
  const Image real = img.to_real();
  const auto v = real.values();
  double lo = 0.0, hi = 0.0;
  if (!v.empty()) {
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    lo = *mn;
    hi = *mx;
  }
  const double scale = hi > lo ? (hi - lo) / 65535.0 : 1.0;
  std::vector<std::uint8_t> bytes(2 * v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto p = static_cast<std::uint16_t>(std::clamp(std::round((v[i] - lo) / scale), 0.0, 65535.0));
    bytes[2 * i] = static_cast<std::uint8_t>(p >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(p & 0xff);
  }
  FilePtr file = open_file(path, "wb");
  encode(setup_file, file.get(), real.height(), real.width(), 16, bytes,
         {{kScaleKey, fmt::format("{:.17g}", scale)}, {kOffsetKey, fmt::format("{:.17g}", lo)}});
}

Image read_png_scaled16(const std::filesystem::path& path) {
  const Decoded d = decode(path);
  if (d.channels != 1) throw IoError(fmt::format("'{}' is not a grayscale PNG", path.string()));
  const double scale = d.has_scale ? d.scale : 1.0;
  const double offset = d.has_scale ? d.offset : 0.0;
  std::vector<double> values(d.height * d.width);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = offset + scale * d.samples[i];
  return Image::real(d.height, d.width, std::move(values));
}

}  // namespace otomo::io
