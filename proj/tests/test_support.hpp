#pragma once

// Helpers shared by the test binaries: smooth random phantoms, error
// metrics and brute-force reference integrals.

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "otomo/core.hpp"
#include "otomo/dataset_io.hpp"
#include "otomo/image_io.hpp"
#include "otomo/physics.hpp"
#include "otomo/radon.hpp"

namespace otomo::testing {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("otomo_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

struct Blob {
  Point2 center;
  double sigma;
  double amplitude;
};

inline std::vector<Blob> random_blobs(std::mt19937_64& rng, std::size_t n, double max_radius,
                                      double min_sigma = 2.0, double max_sigma = 8.0) {
  std::uniform_real_distribution<double> angle(0.0, 2 * kPi), frac(0.0, 1.0),
      sigma(min_sigma, max_sigma), amp(0.2, 1.0);
  std::vector<Blob> blobs;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = sigma(rng);
    // Keep 4 sigma inside the support.
    const double r = std::max(0.0, max_radius - 4 * s) * std::sqrt(frac(rng));
    const double a = angle(rng);
    blobs.push_back({{r * std::cos(a), r * std::sin(a)}, s, amp(rng)});
  }
  return blobs;
}

inline double blob_density(const std::vector<Blob>& blobs, Point2 p) {
  double v = 0.0;
  for (const Blob& b : blobs) {
    const double dx = p.x - b.center.x, dy = p.y - b.center.y;
    v += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2 * b.sigma * b.sigma));
  }
  return v;
}

inline Image blob_image(const std::vector<Blob>& blobs, std::size_t n) {
  std::vector<double> v(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      v[r * n + c] = blob_density(blobs, pixel_to_slice({double(r), double(c)}, n, n));
    }
  }
  return Image::real(n, n, std::move(v));
}

// Closed-form line integral of a sum of Gaussians.
inline double blob_line_integral(const std::vector<Blob>& blobs, const LineParam& line) {
  const Point2 nrm = line.normal();
  double sum = 0.0;
  for (const Blob& b : blobs) {
    const double d = line.t - (b.center.x * nrm.x + b.center.y * nrm.y);
    sum += b.amplitude * std::sqrt(2 * kPi) * b.sigma * std::exp(-d * d / (2 * b.sigma * b.sigma));
  }
  return sum;
}

// Brute-force integral of a pointwise density along a line, composite
// midpoint rule with a fine step.
template <typename Density>
double brute_line_integral(const Density& density, const LineParam& line, double half_length,
                           double step = 1e-3) {
  const Point2 n = line.normal(), v = line.direction();
  const auto steps = static_cast<std::size_t>(std::ceil(2 * half_length / step));
  const double ds = 2 * half_length / double(steps);
  double acc = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double s = -half_length + (double(k) + 0.5) * ds;
    acc += density(Point2{line.t * n.x + s * v.x, line.t * n.y + s * v.y});
  }
  return acc * ds;
}

inline double rmse(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc / double(a.size()));
}

inline double rms(std::span<const double> a) {
  double acc = 0.0;
  for (double v : a) acc += v * v;
  return std::sqrt(acc / double(a.size()));
}

inline double relative_rmse(std::span<const double> estimate, std::span<const double> truth) {
  return rmse(estimate, truth) / rms(truth);
}

// Relative L2 error restricted to the inscribed circle of an n x n slice.
inline double relative_error_in_circle(const Image& estimate, const Image& truth) {
  const std::size_t n = truth.width();
  const double radius = 0.5 * double(n);
  double err = 0.0, norm = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const Point2 p = pixel_to_slice({double(r), double(c)}, n, n);
      if (p.x * p.x + p.y * p.y > radius * radius) continue;
      const double d = estimate.at(r, c) - truth.at(r, c);
      err += d * d;
      norm += truth.at(r, c) * truth.at(r, c);
    }
  }
  return std::sqrt(err / norm);
}

inline double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

// Vertical cylinder whose cross-section is two off-center disks, occupying
// rows [height/6, 5*height/6) of a height x width projection.
struct DiskCylinder {
  std::size_t height = 48;
  std::size_t width = 64;

  radon::Phantom section() const {
    const double w = double(width);
    return radon::Phantom{{radon::Disk{{0.12 * w, 0.06 * w}, 0.16 * w, 1.0},
                           radon::Disk{{-0.16 * w, -0.1 * w}, 0.1 * w, 0.5}}};
  }
  bool occupied(std::size_t row) const { return row >= height / 6 && row < 5 * height / 6; }

  Image projection(double angle_deg) const {
    const ScanGeometry g = ScanGeometry::make(width, 1);
    const radon::Phantom ph = section();
    std::vector<double> v(height * width, 0.0);
    for (std::size_t r = 0; r < height; ++r) {
      if (!occupied(r)) continue;
      for (std::size_t c = 0; c < width; ++c) {
        v[r * width + c] = radon::phantom_line_integral(ph, {g.detector_offset(c), deg_to_rad(angle_deg)});
      }
    }
    return Image::real(height, width, std::move(v));
  }

  // Uniform angles 360 i / n, degrees.
  std::vector<double> angles(std::size_t n) const {
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = 360.0 * double(i) / double(n);
    return a;
  }

  Image truth_slice() const { return radon::rasterize(section(), width); }
};

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = double(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Records `count` projections of the cylinder through the camera model, as a
// directory of 8-bit PNGs named like the real datasets.
inline void write_camera_dataset(const std::filesystem::path& dir, const DiskCylinder& cyl, std::size_t count,
                                 const physics::CameraModel& camera = {}, const std::string& name = "crane") {
  std::filesystem::create_directories(dir);
  const auto angles = cyl.angles(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Image proj = cyl.projection(angles[i]);
    std::vector<std::uint8_t> px(proj.size());
    for (std::size_t k = 0; k < px.size(); ++k) {
      const double r = proj.values()[k];
      px[k] = physics::intensity_to_pixel(camera.i_max * std::exp(-r), camera);
    }
    io::write_png_gray8(dir / dataset::format_filename(name, i, count, "png"),
                        Image::raw(proj.height(), proj.width(), std::move(px)));
  }
}

}  // namespace otomo::testing
