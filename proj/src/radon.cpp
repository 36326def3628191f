#include "otomo/radon.hpp"

#include <cmath>

#include <fmt/format.h>

#include "otomo/parallel.hpp"

namespace otomo::radon {
namespace {

constexpr double kMaxStep = 0.5;

// Bilinear sample with zero outside the raster.
class BilinearSampler {
 public:
  explicit BilinearSampler(const Image& img)
      : img_(img), half_(0.5 * static_cast<double>(img.width() - 1)) {}

  double operator()(double x, double y) const {
    const double col = x + half_;
    const double row = half_ - y;
    const double c0 = std::floor(col);
    const double r0 = std::floor(row);
    const double fx = col - c0;
    const double fy = row - r0;
    const auto ic = static_cast<long>(c0);
    const auto ir = static_cast<long>(r0);
    return (1 - fy) * ((1 - fx) * pixel(ir, ic) + fx * pixel(ir, ic + 1)) +
           fy * ((1 - fx) * pixel(ir + 1, ic) + fx * pixel(ir + 1, ic + 1));
  }

 private:
  double pixel(long r, long c) const {
    const auto n = static_cast<long>(img_.width());
    if (r < 0 || c < 0 || r >= n || c >= n) return 0.0;
    return img_.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  }

  const Image& img_;
  double half_;
};

void check_slice(const Image& slice, const ScanGeometry& geometry) {
  geometry.validate();
  if (slice.empty() || slice.height() != slice.width()) {
    throw ShapeError(
        fmt::format("radon_forward needs a square slice, got {}x{}", slice.height(), slice.width()));
  }
  if (geometry.support_radius > 0.5 * static_cast<double>(slice.width()) + 1e-12) {
    throw ShapeError(fmt::format("support radius {} exceeds the {}x{} slice",
                                 geometry.support_radius, slice.width(), slice.width()));
  }
  if (!slice.is_raw()) {
    for (double v : slice.values()) {
      if (!std::isfinite(v)) throw DomainError("slice contains non-finite values");
    }
  }
}

}  // namespace

void Phantom::validate(double support_radius) const {
  for (const Disk& d : disks) {
    if (!(d.radius > 0.0)) throw DomainError(fmt::format("disk radius must be positive"));
    if (std::hypot(d.center.x, d.center.y) + d.radius > support_radius + 1e-12) {
      throw DomainError(fmt::format("disk at ({}, {}) radius {} leaves support radius {}",
                                    d.center.x, d.center.y, d.radius, support_radius));
    }
  }
}

double Phantom::density_at(Point2 p) const {
  double sum = 0.0;
  for (const Disk& d : disks) {
    const double dx = p.x - d.center.x;
    const double dy = p.y - d.center.y;
    if (dx * dx + dy * dy <= d.radius * d.radius) sum += d.density;
  }
  return sum;
}

Image rasterize(const Phantom& phantom, std::size_t n, int supersample) {
  std::vector<double> values(n * n, 0.0);
  const double inv = 1.0 / supersample;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const Point2 center = pixel_to_slice({static_cast<double>(r), static_cast<double>(c)}, n, n);
      double acc = 0.0;
      for (int i = 0; i < supersample; ++i) {
        for (int j = 0; j < supersample; ++j) {
          const Point2 p{center.x - 0.5 + (j + 0.5) * inv, center.y - 0.5 + (i + 0.5) * inv};
          acc += phantom.density_at(p);
        }
      }
      values[r * n + c] = acc * inv * inv;
    }
  }
  return Image::real(n, n, std::move(values));
}

Sinogram radon_forward(const Image& slice, const ScanGeometry& geometry) {
  return radon_forward(slice, geometry, angle_grid(geometry));
}

Sinogram radon_forward(const Image& slice, const ScanGeometry& geometry,
                       std::vector<double> angles) {
  check_slice(slice, geometry);
  Sinogram sino(geometry, std::move(angles));
  const Image real = slice.to_real();
  const BilinearSampler sample(real);
  const double radius = geometry.support_radius;

  parallel_for(sino.n_angles(), [&](std::size_t j) {
    const LineParam base{0.0, sino.angles()[j]};
    const Point2 n = base.normal();
    const Point2 v = base.direction();
    for (std::size_t i = 0; i < sino.n_detectors(); ++i) {
      const double t = geometry.detector_offset(i);
      if (std::abs(t) >= radius) continue;
      const double half = std::sqrt(radius * radius - t * t);
      const auto steps = static_cast<std::size_t>(std::ceil(2.0 * half / kMaxStep));
      const double ds = 2.0 * half / static_cast<double>(steps);
      double acc = 0.0;
      for (std::size_t k = 0; k < steps; ++k) {
        const double s = -half + (static_cast<double>(k) + 0.5) * ds;
        acc += sample(t * n.x + s * v.x, t * n.y + s * v.y);
      }
      sino.at(i, j) = acc * ds;
    }
  });
  return sino;
}

double phantom_line_integral(const Phantom& phantom, const LineParam& line) {
  const Point2 n = line.normal();
  double sum = 0.0;
  for (const Disk& d : phantom.disks) {
    const double dist = line.t - (d.center.x * n.x + d.center.y * n.y);
    const double h2 = d.radius * d.radius - dist * dist;
    if (h2 > 0.0) sum += 2.0 * d.density * std::sqrt(h2);
  }
  return sum;
}

Sinogram phantom_sinogram(const Phantom& phantom, const ScanGeometry& geometry) {
  return phantom_sinogram(phantom, geometry, angle_grid(geometry));
}

Sinogram phantom_sinogram(const Phantom& phantom, const ScanGeometry& geometry,
                          std::vector<double> angles) {
  geometry.validate();
  phantom.validate(geometry.support_radius);
  Sinogram sino(geometry, std::move(angles));
  for (std::size_t j = 0; j < sino.n_angles(); ++j) {
    for (std::size_t i = 0; i < sino.n_detectors(); ++i) {
      sino.at(i, j) = phantom_line_integral(phantom, {geometry.detector_offset(i), sino.angles()[j]});
    }
  }
  return sino;
}

}  // namespace otomo::radon
