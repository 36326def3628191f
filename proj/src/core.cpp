#include "otomo/core.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace otomo {

SaturationError::SaturationError(std::size_t row, std::size_t col, int value)
    : DomainError(fmt::format("pixel ({}, {}) has value {}: ray fully absorbed, "
                              "logarithm undefined",
                              row, col, value)),
      row_(row),
      col_(col),
      value_(value) {}

Image Image::raw(std::size_t height, std::size_t width, std::uint8_t fill) {
  return raw(height, width, std::vector<std::uint8_t>(height * width, fill));
}

Image Image::raw(std::size_t height, std::size_t width, std::vector<std::uint8_t> pixels) {
  if (pixels.size() != height * width) {
    throw ShapeError(fmt::format("image {}x{} needs {} pixels, got {}", height, width,
                                 height * width, pixels.size()));
  }
  Image img;
  img.height_ = height;
  img.width_ = width;
  img.mode_ = PixelMode::Raw8;
  img.raw_ = std::move(pixels);
  return img;
}

Image Image::real(std::size_t height, std::size_t width, double fill) {
  return real(height, width, std::vector<double>(height * width, fill));
}

Image Image::real(std::size_t height, std::size_t width, std::vector<double> values) {
  if (values.size() != height * width) {
    throw ShapeError(fmt::format("image {}x{} needs {} values, got {}", height, width,
                                 height * width, values.size()));
  }
  if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); })) {
    throw DomainError("real image contains non-finite values");
  }
  Image img;
  img.height_ = height;
  img.width_ = width;
  img.mode_ = PixelMode::Real;
  img.real_ = std::move(values);
  return img;
}

Image Image::crop(std::size_t top, std::size_t left, std::size_t height, std::size_t width) const {
  if (top + height > height_ || left + width > width_) {
    throw ShapeError(fmt::format("crop (top={}, left={}, {}x{}) exceeds image {}x{}", top, left,
                                 height, width, height_, width_));
  }
  Image out;
  out.height_ = height;
  out.width_ = width;
  out.mode_ = mode_;
  if (is_raw()) {
    out.raw_.reserve(height * width);
    for (std::size_t r = 0; r < height; ++r) {
      auto row = raw_.begin() + static_cast<std::ptrdiff_t>((top + r) * width_ + left);
      out.raw_.insert(out.raw_.end(), row, row + static_cast<std::ptrdiff_t>(width));
    }
  } else {
    out.real_.reserve(height * width);
    for (std::size_t r = 0; r < height; ++r) {
      auto row = real_.begin() + static_cast<std::ptrdiff_t>((top + r) * width_ + left);
      out.real_.insert(out.real_.end(), row, row + static_cast<std::ptrdiff_t>(width));
    }
  }
  return out;
}

Image Image::to_real() const {
  if (!is_raw()) return *this;
  return real(height_, width_, std::vector<double>(raw_.begin(), raw_.end()));
}

ScanGeometry ScanGeometry::make(std::size_t n_detectors, std::size_t n_angles, AngleSpan span,
                                double pitch) {
  ScanGeometry g;
  g.n_detectors = n_detectors;
  g.detector_pitch = pitch;
  g.n_angles = n_angles;
  g.angle_span = span;
  g.support_radius = 0.5 * static_cast<double>(n_detectors) * pitch;
  return g;
}

void ScanGeometry::validate() const {
  if (n_detectors < 1) throw ShapeError("scan geometry needs at least one detector");
  if (n_angles < 1) throw ShapeError("scan geometry needs at least one angle");
  if (angle_span != AngleSpan::Half && angle_span != AngleSpan::Full) {
    throw ShapeError("angle span must be 180 or 360 degrees");
  }
  if (!(detector_pitch > 0.0)) throw ShapeError("detector pitch must be positive");
  if (!(support_radius > 0.0) || support_radius > 0.5 * detector_extent() + 1e-12) {
    throw ShapeError(fmt::format("support radius {} does not fit a detector of extent {}",
                                 support_radius, detector_extent()));
  }
}

Point2 LineParam::normal() const { return {std::cos(theta), std::sin(theta)}; }

Point2 LineParam::direction() const { return {-std::sin(theta), std::cos(theta)}; }

std::vector<Point2> line_points(const LineParam& line, std::span<const double> s_values) {
  const Point2 n = line.normal();
  const Point2 v = line.direction();
  std::vector<Point2> pts;
  pts.reserve(s_values.size());
  for (double s : s_values) {
    pts.push_back({line.t * n.x + s * v.x, line.t * n.y + s * v.y});
  }
  return pts;
}

std::vector<double> angle_grid(const ScanGeometry& geometry) {
  std::vector<double> out = angle_grid_degrees(geometry);
  for (double& a : out) a = deg_to_rad(a);
  return out;
}

std::vector<double> angle_grid_degrees(const ScanGeometry& geometry) {
  if (geometry.n_angles < 1) throw ShapeError("angle grid needs at least one angle");
  const double span = span_degrees(geometry.angle_span);
  std::vector<double> out(geometry.n_angles);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<double>(i) * span / static_cast<double>(geometry.n_angles);
  }
  return out;
}

Point2 pixel_to_slice(PixelPos pos, std::size_t height, std::size_t width) {
  return {pos.col - 0.5 * static_cast<double>(width - 1),
          0.5 * static_cast<double>(height - 1) - pos.row};
}

PixelPos slice_to_pixel(Point2 p, std::size_t height, std::size_t width) {
  return {0.5 * static_cast<double>(height - 1) - p.y, p.x + 0.5 * static_cast<double>(width - 1)};
}

Sinogram::Sinogram(ScanGeometry geometry, std::vector<double> angles)
    : geometry_(geometry), angles_(std::move(angles)) {
  geometry_.n_angles = angles_.size();
  values_.assign(geometry_.n_detectors * angles_.size(), 0.0);
}

Sinogram::Sinogram(ScanGeometry geometry, std::vector<double> angles, std::vector<double> values)
    : geometry_(geometry), angles_(std::move(angles)), values_(std::move(values)) {
  geometry_.n_angles = angles_.size();
  if (values_.size() != geometry_.n_detectors * angles_.size()) {
    throw ShapeError(fmt::format("sinogram {}x{} needs {} values, got {}", geometry_.n_detectors,
                                 angles_.size(), geometry_.n_detectors * angles_.size(),
                                 values_.size()));
  }
}

std::vector<double> Sinogram::projection(std::size_t angle_index) const {
  std::vector<double> p(n_detectors());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = at(i, angle_index);
  return p;
}

bool Sinogram::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Volume::Volume(std::size_t depth, std::size_t rows, std::size_t cols)
    : depth_(depth), rows_(rows), cols_(cols), voxels_(depth * rows * cols, 0.0f) {}

Image Volume::slice(std::size_t k) const {
  std::vector<double> v(rows_ * cols_);
  const auto* base = voxels_.data() + k * rows_ * cols_;
  std::copy(base, base + v.size(), v.begin());
  return Image::real(rows_, cols_, std::move(v));
}

void Volume::set_slice(std::size_t k, const Image& slice) {
  if (k >= depth_ || slice.height() != rows_ || slice.width() != cols_) {
    throw ShapeError(fmt::format("slice {} ({}x{}) does not fit volume {}x{}x{}", k,
                                 slice.height(), slice.width(), depth_, rows_, cols_));
  }
  float* base = voxels_.data() + k * rows_ * cols_;
  for (std::size_t i = 0; i < rows_ * cols_; ++i) {
    base[i] = static_cast<float>(slice.at(i / cols_, i % cols_));
  }
}

void ProjectionStack::validate() const {
  if (angles.size() != images.size()) {
    throw ShapeError(fmt::format("stack has {} images but {} angles", images.size(), angles.size()));
  }
  for (std::size_t n = 1; n < images.size(); ++n) {
    if (images[n].height() != height() || images[n].width() != width()) {
      throw ShapeError(fmt::format("image {} is {}x{}, expected {}x{}", n, images[n].height(),
                                   images[n].width(), height(), width()));
    }
  }
}

}  // namespace otomo
