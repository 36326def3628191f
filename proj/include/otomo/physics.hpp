#pragma once

// Beer's-law attenuation, the gamma-encoded camera pixel model, and the
// conversion of recorded pixel values into line integrals of mu.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

#include "otomo/core.hpp"

namespace otomo::physics {

struct CameraModel {
  double gamma = 2.2;
  double i_max = 1.0;
  // Smallest pixel value accepted by the logarithmic conversion.
  int v_floor = 1;

  void validate() const;
};

enum class PreprocessMode { Exact, Linear };

// What the exact conversion does with pixels below the floor.
enum class FloorPolicy { Error, Clamp };

struct PreprocessConfig {
  CameraModel camera;
  PreprocessMode mode = PreprocessMode::Linear;
  // Linear mode only: keep the gamma/255 factor. Without it the output is
  // the plain image complement 255 - V.
  bool keep_scale = true;
  FloorPolicy floor_policy = FloorPolicy::Error;
};

// I_in * exp(-line_integral). Throws DomainError for I_in <= 0 or a negative
// line integral.
double attenuate(double i_in, double line_integral);

// Unrounded 255 * (i / i_max)^(1/gamma).
double intensity_to_pixel_value(double intensity, const CameraModel& camera);
// Rounded to the 8-bit grid. Throws DomainError for i outside [0, i_max].
std::uint8_t intensity_to_pixel(double intensity, const CameraModel& camera);

// -gamma * ln(v / 255). Takes real-valued v so the unquantized path can be
// exercised. Throws SaturationError (at row = col = 0) for v < v_floor.
double pixel_to_radon_exact(double v, const CameraModel& camera);

// gamma * (1 - v/255), or 255 - v without the scale factor.
double pixel_to_radon_linear(double v, const PreprocessConfig& config);

double pixel_to_radon(double v, const PreprocessConfig& config);

// pixel_to_radon for all 256 values. In exact mode values below v_floor
// take the floor's value (the caller decides whether that is an error).
std::array<double, 256> radon_lookup(const PreprocessConfig& config);

std::string_view to_string(PreprocessMode mode);
std::string_view to_string(FloorPolicy policy);
PreprocessMode parse_preprocess_mode(std::string_view name);
FloorPolicy parse_floor_policy(std::string_view name);

struct PreprocessReport {
  std::size_t clamped_pixels = 0;
};

// Elementwise pixel -> line integral. Input must be raw 8-bit; output is
// real mode. In exact mode with FloorPolicy::Error a dark pixel raises
// SaturationError carrying its coordinates.
Image preprocess_image(const Image& img, const PreprocessConfig& config,
                       PreprocessReport* report = nullptr);

}  // namespace otomo::physics
