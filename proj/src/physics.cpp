#include "otomo/physics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

namespace otomo::physics {

void CameraModel::validate() const {
  if (!(gamma > 0.0)) throw DomainError(fmt::format("gamma must be positive, got {}", gamma));
  if (!(i_max > 0.0)) throw DomainError(fmt::format("i_max must be positive, got {}", i_max));
  if (v_floor < 1 || v_floor > 255) {
    throw DomainError(fmt::format("v_floor must lie in [1, 255], got {}", v_floor));
  }
}

std::string_view to_string(PreprocessMode mode) {
  return mode == PreprocessMode::Exact ? "exact" : "linear";
}

std::string_view to_string(FloorPolicy policy) {
  return policy == FloorPolicy::Error ? "error" : "clamp";
}

PreprocessMode parse_preprocess_mode(std::string_view name) {
  if (name == "exact") return PreprocessMode::Exact;
  if (name == "linear") return PreprocessMode::Linear;
  throw ParseError(fmt::format("unknown preprocessing mode '{}'", name));
}

FloorPolicy parse_floor_policy(std::string_view name) {
  if (name == "error") return FloorPolicy::Error;
  if (name == "clamp") return FloorPolicy::Clamp;
  throw ParseError(fmt::format("unknown floor policy '{}'", name));
}

double attenuate(double i_in, double line_integral) {
  if (!(i_in > 0.0)) {
    throw DomainError(fmt::format("incoming intensity must be positive, got {}", i_in));
  }
  if (!(line_integral >= 0.0)) {
    throw DomainError(fmt::format("line integral must be nonnegative, got {}", line_integral));
  }
  return i_in * std::exp(-line_integral);
}

double intensity_to_pixel_value(double intensity, const CameraModel& camera) {
  camera.validate();
  if (!(intensity >= 0.0) || intensity > camera.i_max) {
    throw DomainError(
        fmt::format("intensity {} outside sensor range [0, {}]", intensity, camera.i_max));
  }
  return 255.0 * std::pow(intensity / camera.i_max, 1.0 / camera.gamma);
}

std::uint8_t intensity_to_pixel(double intensity, const CameraModel& camera) {
  const double v = std::round(intensity_to_pixel_value(intensity, camera));
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

double pixel_to_radon_exact(double v, const CameraModel& camera) {
  camera.validate();
  if (!(v >= static_cast<double>(camera.v_floor))) {
    throw SaturationError(0, 0, static_cast<int>(std::floor(v)));
  }
  // Unquantized values can exceed 255 by rounding noise only.
  return std::max(0.0, -camera.gamma * std::log(v / 255.0));
}

double pixel_to_radon_linear(double v, const PreprocessConfig& config) {
  if (config.keep_scale) return config.camera.gamma * (1.0 - v / 255.0);
  return 255.0 - v;
}

double pixel_to_radon(double v, const PreprocessConfig& config) {
  return config.mode == PreprocessMode::Exact ? pixel_to_radon_exact(v, config.camera)
                                              : pixel_to_radon_linear(v, config);
}

std::array<double, 256> radon_lookup(const PreprocessConfig& config) {
  config.camera.validate();
  std::array<double, 256> lut{};
  for (int v = 0; v < 256; ++v) {
    if (config.mode == PreprocessMode::Linear) {
      lut[v] = pixel_to_radon_linear(v, config);
    } else {
      lut[v] = pixel_to_radon_exact(std::max(v, config.camera.v_floor), config.camera);
    }
  }
  return lut;
}

Image preprocess_image(const Image& img, const PreprocessConfig& config, PreprocessReport* report) {
  if (!img.is_raw()) throw DomainError("preprocessing expects a raw 8-bit image");
  config.camera.validate();

  // The floor check stays per pixel so errors carry a location.
  const std::array<double, 256> lut = radon_lookup(config);

  std::vector<double> out(img.size());
  std::size_t clamped = 0;
  const auto px = img.raw_pixels();
  const int floor = config.camera.v_floor;
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (config.mode == PreprocessMode::Exact && px[i] < floor) {
      if (config.floor_policy == FloorPolicy::Error) {
        throw SaturationError(i / img.width(), i % img.width(), px[i]);
      }
      ++clamped;
    }
    out[i] = lut[px[i]];
  }
  if (report) report->clamped_pixels = clamped;
  return Image::real(img.height(), img.width(), std::move(out));
}

}  // namespace otomo::physics
