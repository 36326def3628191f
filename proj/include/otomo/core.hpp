#pragma once

// Shared domain types for the tomography pipeline: images, scan geometry,
// the (t, theta) line parametrization, sinograms, volumes and projection
// stacks.
//
// Slice coordinates: the image center is the rotation origin, x grows to
// the right and y grows upward, so pixel (row, col) of an h x w slice sits
// at (col - (w-1)/2, (h-1)/2 - row). A line L(t, theta) is the point set
// { t*(cos theta, sin theta) + s*(-sin theta, cos theta) }.

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "otomo/error.hpp"

namespace otomo {

inline constexpr double kPi = std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

enum class PixelMode { Raw8, Real };

// 2D grayscale raster, row-major. Raw8 holds camera values V in [0, 255];
// Real holds processed values (absorbance, reconstructed mu, ...).
class Image {
 public:
  Image() = default;

  static Image raw(std::size_t height, std::size_t width, std::uint8_t fill = 0);
  static Image raw(std::size_t height, std::size_t width, std::vector<std::uint8_t> pixels);
  static Image real(std::size_t height, std::size_t width, double fill = 0.0);
  static Image real(std::size_t height, std::size_t width, std::vector<double> values);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return height_ * width_; }
  bool empty() const { return size() == 0; }
  PixelMode mode() const { return mode_; }
  bool is_raw() const { return mode_ == PixelMode::Raw8; }

  // Mode-independent read access.
  double at(std::size_t row, std::size_t col) const {
    const std::size_t i = row * width_ + col;
    return is_raw() ? static_cast<double>(raw_[i]) : real_[i];
  }

  std::uint8_t raw_at(std::size_t row, std::size_t col) const { return raw_[row * width_ + col]; }
  std::uint8_t& raw_at(std::size_t row, std::size_t col) { return raw_[row * width_ + col]; }
  double real_at(std::size_t row, std::size_t col) const { return real_[row * width_ + col]; }
  double& real_at(std::size_t row, std::size_t col) { return real_[row * width_ + col]; }

  std::span<const std::uint8_t> raw_pixels() const { return raw_; }
  std::span<std::uint8_t> raw_pixels() { return raw_; }
  std::span<const double> values() const { return real_; }
  std::span<double> values() { return real_; }

  // Throws ShapeError when the rectangle leaves the image.
  Image crop(std::size_t top, std::size_t left, std::size_t height, std::size_t width) const;

  // Copy in real mode (raw values become doubles).
  Image to_real() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  PixelMode mode_ = PixelMode::Real;
  std::vector<std::uint8_t> raw_;
  std::vector<double> real_;
};

enum class AngleSpan { Half = 180, Full = 360 };

inline double span_degrees(AngleSpan span) { return static_cast<double>(static_cast<int>(span)); }

struct ScanGeometry {
  std::size_t n_detectors = 1;
  double detector_pitch = 1.0;
  std::size_t n_angles = 1;
  AngleSpan angle_span = AngleSpan::Full;
  // mu vanishes outside this radius (same length unit as the pitch).
  double support_radius = 0.5;

  // Detector fully covering the object: support radius = n * pitch / 2.
  static ScanGeometry make(std::size_t n_detectors, std::size_t n_angles,
                           AngleSpan span = AngleSpan::Full, double pitch = 1.0);

  double detector_extent() const { return static_cast<double>(n_detectors) * detector_pitch; }

  // Signed offset of detector cell i; the grid is centered on t = 0.
  double detector_offset(std::size_t i) const {
    return (static_cast<double>(i) - 0.5 * static_cast<double>(n_detectors - 1)) * detector_pitch;
  }

  // Throws ShapeError on broken invariants.
  void validate() const;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct LineParam {
  double t = 0.0;      // signed normal distance from the origin
  double theta = 0.0;  // radians

  Point2 normal() const;     // (cos theta, sin theta)
  Point2 direction() const;  // (-sin theta, cos theta)
};

std::vector<Point2> line_points(const LineParam& line, std::span<const double> s_values);

// theta_i = i * span / n, endpoint excluded. Radians.
std::vector<double> angle_grid(const ScanGeometry& geometry);
std::vector<double> angle_grid_degrees(const ScanGeometry& geometry);

struct PixelPos {
  double row = 0.0;
  double col = 0.0;
};

Point2 pixel_to_slice(PixelPos pos, std::size_t height, std::size_t width);
PixelPos slice_to_pixel(Point2 p, std::size_t height, std::size_t width);

// Line-integral data of one slice, indexed (detector index, angle index).
class Sinogram {
 public:
  Sinogram() = default;
  // Angles in radians; their count overrides geometry.n_angles.
  Sinogram(ScanGeometry geometry, std::vector<double> angles);
  Sinogram(ScanGeometry geometry, std::vector<double> angles, std::vector<double> values);

  std::size_t n_detectors() const { return geometry_.n_detectors; }
  std::size_t n_angles() const { return angles_.size(); }
  const ScanGeometry& geometry() const { return geometry_; }
  std::span<const double> angles() const { return angles_; }

  double at(std::size_t t_index, std::size_t angle_index) const {
    return values_[t_index * angles_.size() + angle_index];
  }
  double& at(std::size_t t_index, std::size_t angle_index) {
    return values_[t_index * angles_.size() + angle_index];
  }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  std::vector<double> projection(std::size_t angle_index) const;

  bool all_finite() const;

 private:
  ScanGeometry geometry_;
  std::vector<double> angles_;
  std::vector<double> values_;
};

// Voxel grid of reconstructed absorption, dims (depth, rows, cols) where depth
// runs along the rotation axis. Voxel order: depth-major, then row, then col.
class Volume {
 public:
  Volume() = default;
  Volume(std::size_t depth, std::size_t rows, std::size_t cols);

  std::size_t depth() const { return depth_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return voxels_.size(); }

  float at(std::size_t k, std::size_t row, std::size_t col) const {
    return voxels_[(k * rows_ + row) * cols_ + col];
  }
  float& at(std::size_t k, std::size_t row, std::size_t col) {
    return voxels_[(k * rows_ + row) * cols_ + col];
  }

  Image slice(std::size_t k) const;
  void set_slice(std::size_t k, const Image& slice);

  std::span<const float> voxels() const { return voxels_; }
  std::span<float> voxels() { return voxels_; }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  std::size_t depth_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> voxels_;
};

// N images recorded around the rotation axis, one angle (radians) per image.
struct ProjectionStack {
  std::vector<Image> images;
  std::vector<double> angles;
  std::vector<std::string> sources;  // file names or labels, may be empty

  std::size_t count() const { return images.size(); }
  std::size_t height() const { return images.empty() ? 0 : images.front().height(); }
  std::size_t width() const { return images.empty() ? 0 : images.front().width(); }

  // Throws ShapeError on heterogeneous dims or angle-count mismatch.
  void validate() const;
};

}  // namespace otomo
