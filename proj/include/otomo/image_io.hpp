#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "otomo/core.hpp"

namespace otomo::io {

struct PngReadInfo {
  bool converted_from_color = false;
  int source_bit_depth = 8;
};

// Reads any PNG as an 8-bit grayscale raw image. Color input is reduced to
// luminance with the ITU-R BT.601 weights (0.299, 0.587, 0.114) and reported
// through `info`; 16-bit input keeps the high byte.
Image read_png_gray8(const std::filesystem::path& path, PngReadInfo* info = nullptr);

// Raw images are written as-is; real images must already be in [0, 255]
// (values are rounded and clamped).
void write_png_gray8(const std::filesystem::path& path, const Image& img);
std::vector<std::uint8_t> encode_png_gray8(const Image& img);

// Real image stored as 16-bit grayscale: v = offset + scale * p. The mapping
// is recorded in tEXt chunks so read_png_scaled16 restores the values to
// within scale / 2.
void write_png_scaled16(const std::filesystem::path& path, const Image& img);
Image read_png_scaled16(const std::filesystem::path& path);

}  // namespace otomo::io
