#include "otomo/recon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <numeric>

#include <fmt/format.h>

#include "otomo/parallel.hpp"

namespace otomo::recon {
namespace {

constexpr double kTwoPi = 2.0 * kPi;
constexpr double kAngleTol = 1e-9;

double wrap_two_pi(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi - kAngleTol) a = 0.0;
  return a;
}

// Distance between two angles on the circle.
double circular_gap(double a, double b) {
  const double d = std::fmod(std::abs(a - b), kTwoPi);
  return std::min(d, kTwoPi - d);
}

struct Folded {
  double angle;
  std::size_t source;
  std::vector<double> projection;
};

std::vector<double> mirrored(std::vector<double> p) {
  std::reverse(p.begin(), p.end());
  return p;
}

// Zero margin around filtered projections so interpolation never needs a
// bounds check inside the reconstruction circle.
constexpr std::size_t kPad = 2;

}  // namespace

Interpolation parse_interpolation(std::string_view name) {
  if (name == "nearest") return Interpolation::Nearest;
  if (name == "linear") return Interpolation::Linear;
  throw ParseError(fmt::format("unknown interpolation '{}'", name));
}

std::string_view to_string(Interpolation interp) {
  return interp == Interpolation::Nearest ? "nearest" : "linear";
}

SinogramStack::SinogramStack(const ProjectionStack& stack) : stack_(&stack) {}

Sinogram SinogramStack::operator[](std::size_t k) const {
  if (k >= size()) throw ShapeError(fmt::format("sinogram {} out of range ({})", k, size()));
  const std::size_t w = n_detectors();
  const std::size_t n_img = n_angles();
  std::vector<double> values(w * n_img);
  for (std::size_t n = 0; n < n_img; ++n) {
    const Image& img = stack_->images[n];
    for (std::size_t j = 0; j < w; ++j) values[j * n_img + n] = img.at(k, j);
  }
  return Sinogram(ScanGeometry::make(w, n_img), stack_->angles, std::move(values));
}

SinogramStack stack_to_sinograms(const ProjectionStack& stack) {
  stack.validate();
  return SinogramStack(stack);
}

WeightedProjections prepare_projections(const Sinogram& sino, AngleHandling handling) {
  const std::size_t n_ang = sino.n_angles();
  std::vector<double> wrapped(n_ang);
  for (std::size_t j = 0; j < n_ang; ++j) wrapped[j] = wrap_two_pi(sino.angles()[j]);

  std::vector<Folded> folded;
  folded.reserve(n_ang);
  std::vector<bool> used(n_ang, false);

  if (handling == AngleHandling::AverageAntipodes) {
    for (std::size_t j = 0; j < n_ang; ++j) {
      if (used[j] || wrapped[j] >= kPi - kAngleTol) continue;
      for (std::size_t k = 0; k < n_ang; ++k) {
        if (used[k] || k == j) continue;
        if (circular_gap(wrapped[k], wrapped[j] + kPi) < kAngleTol) {
          std::vector<double> p = sino.projection(j);
          const std::vector<double> q = sino.projection(k);
          const std::size_t n = p.size();
          for (std::size_t i = 0; i < n; ++i) p[i] = 0.5 * (p[i] + q[n - 1 - i]);
          folded.push_back({wrapped[j], j, std::move(p)});
          used[j] = used[k] = true;
          break;
        }
      }
    }
  }
  for (std::size_t j = 0; j < n_ang; ++j) {
    if (used[j]) continue;
    if (wrapped[j] >= kPi - kAngleTol) {
      folded.push_back({std::max(0.0, wrapped[j] - kPi), j, mirrored(sino.projection(j))});
    } else {
      folded.push_back({wrapped[j], j, sino.projection(j)});
    }
  }
  std::sort(folded.begin(), folded.end(), [](const Folded& a, const Folded& b) {
    return a.angle != b.angle ? a.angle < b.angle : a.source < b.source;
  });

  WeightedProjections out;
  const std::size_t m = folded.size();
  out.angles.reserve(m);
  out.weights.reserve(m);
  out.projections.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double prev = j == 0 ? folded[m - 1].angle - kPi : folded[j - 1].angle;
    const double next = j + 1 == m ? folded[0].angle + kPi : folded[j + 1].angle;
    out.angles.push_back(folded[j].angle);
    out.weights.push_back(m == 1 ? kPi : 0.5 * (next - prev));
    out.projections.push_back(std::move(folded[j].projection));
  }
  return out;
}

Image fbp_slice(const Sinogram& sino, const FbpOptions& options) {
  if (sino.n_angles() < 2) {
    throw ShapeError(fmt::format("filtered back-projection needs at least 2 angles, got {}",
                                 sino.n_angles()));
  }
  if (!sino.all_finite()) throw DomainError("sinogram contains non-finite values");
  options.filter.validate();

  const std::size_t n = sino.n_detectors();
  const double pitch = sino.geometry().detector_pitch;
  WeightedProjections prep = prepare_projections(sino, options.angle_handling);

  RampFilter filter(n, options.filter);
  const std::size_t stride = n + 2 * kPad;
  const std::size_t n_proj = prep.angles.size();
  // Filtered projections, zero-padded so edge reads need no bounds checks.
  std::vector<double> filtered(n_proj * stride, 0.0);
  for (std::size_t j = 0; j < n_proj; ++j) {
    std::span<double> q(filtered.data() + j * stride + kPad, n);
    filter.apply(prep.projections[j], q);
    const double scale = prep.weights[j] / pitch;
    for (double& v : q) v *= scale;
  }

  const double center = 0.5 * static_cast<double>(n - 1);
  const double radius = 0.5 * static_cast<double>(n);
  const double offset = center + static_cast<double>(kPad);
  std::vector<double> cos_t(n_proj), sin_t(n_proj);
  for (std::size_t j = 0; j < n_proj; ++j) {
    cos_t[j] = std::cos(prep.angles[j]);
    sin_t[j] = std::sin(prep.angles[j]);
  }

  // Linear interpolation reads (value, forward difference) pairs.
  std::vector<double> slopes;
  if (options.interpolation == Interpolation::Linear) {
    slopes.assign(2 * filtered.size(), 0.0);
    for (std::size_t j = 0; j < n_proj; ++j) {
      const double* q = filtered.data() + j * stride;
      double* d = slopes.data() + 2 * j * stride;
      for (std::size_t i = 0; i < stride; ++i) {
        d[2 * i] = q[i];
        d[2 * i + 1] = i + 1 < stride ? q[i + 1] - q[i] : 0.0;
      }
    }
  }

  // Row-major sweep: one output row stays in cache while every angle is
  // added, four angles per pass.
  std::vector<double> acc(n * n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double y = center - static_cast<double>(r);
    const double half = std::sqrt(std::max(0.0, radius * radius - y * y));
    const double lo = std::ceil(center - half);
    const double hi = std::floor(center + half);
    if (hi < lo) continue;
    const auto col_lo = static_cast<std::size_t>(std::max(0.0, lo));
    const auto col_hi = static_cast<std::size_t>(std::min(hi + 1.0, double(n)));
    double* row = acc.data() + r * n;
    auto base = [&](std::size_t j) { return offset - center * cos_t[j] + y * sin_t[j]; };

    if (options.interpolation == Interpolation::Nearest) {
      for (std::size_t j = 0; j < n_proj; ++j) {
        const double c = cos_t[j], b = base(j);
        const double* qp = filtered.data() + j * stride;
        for (std::size_t col = col_lo; col < col_hi; ++col) {
          row[col] += qp[static_cast<std::int32_t>(b + static_cast<double>(col) * c + 0.5)];
        }
      }
      continue;
    }

    std::size_t j = 0;
    for (; j + 4 <= n_proj; j += 4) {
      const double c0 = cos_t[j], c1 = cos_t[j + 1], c2 = cos_t[j + 2], c3 = cos_t[j + 3];
      const double b0 = base(j), b1 = base(j + 1), b2 = base(j + 2), b3 = base(j + 3);
      const double* d0 = slopes.data() + 2 * j * stride;
      const double* d1 = d0 + 2 * stride;
      const double* d2 = d1 + 2 * stride;
      const double* d3 = d2 + 2 * stride;
      for (std::size_t col = col_lo; col < col_hi; ++col) {
        const double x = static_cast<double>(col);
        const double p0 = b0 + x * c0, p1 = b1 + x * c1, p2 = b2 + x * c2, p3 = b3 + x * c3;
        const auto i0 = static_cast<std::int32_t>(p0), i1 = static_cast<std::int32_t>(p1);
        const auto i2 = static_cast<std::int32_t>(p2), i3 = static_cast<std::int32_t>(p3);
        row[col] += (d0[2 * i0] + (p0 - i0) * d0[2 * i0 + 1]) + (d1[2 * i1] + (p1 - i1) * d1[2 * i1 + 1]) +
                    (d2[2 * i2] + (p2 - i2) * d2[2 * i2 + 1]) + (d3[2 * i3] + (p3 - i3) * d3[2 * i3 + 1]);
      }
    }
    for (; j < n_proj; ++j) {
      const double c = cos_t[j], b = base(j);
      const double* d = slopes.data() + 2 * j * stride;
      for (std::size_t col = col_lo; col < col_hi; ++col) {
        const double p = b + static_cast<double>(col) * c;
        const auto i = static_cast<std::int32_t>(p);
        row[col] += d[2 * i] + (p - i) * d[2 * i + 1];
      }
    }
  }
  return Image::real(n, n, std::move(acc));
}

ReconJob ReconJob::for_stack(const ProjectionStack& stack, FbpOptions options) {
  ReconJob job;
  job.height = stack.height();
  job.width = stack.width();
  job.count = stack.count();
  job.fbp = options;
  job.angles_deg.reserve(stack.angles.size());
  for (double a : stack.angles) {
    // rad -> deg can land a hair on either side of 360
    double deg = std::fmod(rad_to_deg(a), 360.0);
    if (deg < 0.0) deg += 360.0;
    if (deg >= 360.0 - 1e-9) deg = 0.0;
    job.angles_deg.push_back(deg);
  }
  return job;
}

void ReconJob::validate() const {
  if (height == 0 || width == 0) throw ShapeError("reconstruction job has empty image dims");
  if (count < 2) throw ShapeError(fmt::format("reconstruction needs at least 2 images, got {}", count));
  if (angles_deg.size() != count) {
    throw ShapeError(fmt::format("job has {} images but {} angles", count, angles_deg.size()));
  }
  for (double a : angles_deg) {
    if (!(a >= 0.0 && a < 360.0)) throw DomainError(fmt::format("angle {} outside [0, 360)", a));
  }
  if (!(detector_pitch > 0.0)) throw DomainError("detector pitch must be positive");
  fbp.filter.validate();
}

void reconstruct_slices(const ReconJob& job, const SliceSource& source, const SliceSink& sink,
                        const ProgressFn& progress) {
  job.validate();
  std::mutex progress_mutex;
  std::size_t done = 0;
  parallel_for(
      job.height,
      [&](std::size_t k) {
        Image slice;
        try {
          Sinogram sino = source(k);
          if (sino.n_detectors() != job.width || sino.n_angles() != job.count) {
            throw ShapeError(fmt::format("sinogram is {}x{}, expected {}x{}", sino.n_detectors(),
                                         sino.n_angles(), job.width, job.count));
          }
          slice = fbp_slice(sino, job.fbp);
        } catch (const std::exception& e) {
          throw SliceError(k, e.what());
        }
        sink(k, slice);
        if (progress) {
          std::lock_guard lock(progress_mutex);
          progress(++done, job.height);
        }
      },
      job.workers == 0 ? default_workers() : job.workers);
}

SliceError::SliceError(std::size_t slice, const std::string& what)
    : Error(fmt::format("slice {}: {}", slice, what)), slice_(slice) {}

Volume reconstruct_volume(const ReconJob& job, const ProjectionStack& stack,
                          const ProgressFn& progress) {
  job.validate();
  stack.validate();
  if (stack.height() != job.height || stack.width() != job.width || stack.count() != job.count) {
    throw ShapeError(fmt::format("stack {}x{}x{} does not match job {}x{}x{}", stack.height(),
                                 stack.width(), stack.count(), job.height, job.width, job.count));
  }
  for (const Image& img : stack.images) {
    if (img.is_raw()) throw DomainError("reconstruction expects a preprocessed (real-mode) stack");
  }

  std::vector<double> angles;
  angles.reserve(job.count);
  for (double a : job.angles_deg) angles.push_back(deg_to_rad(a));

  const SinogramStack sinos(stack);
  Volume vol(job.height, job.width, job.width);
  reconstruct_slices(
      job,
      [&](std::size_t k) {
        Sinogram s = sinos[k];
        ScanGeometry g = s.geometry();
        g.detector_pitch = job.detector_pitch;
        g.support_radius = 0.5 * g.detector_extent();
        return Sinogram(g, angles, std::vector<double>(s.values().begin(), s.values().end()));
      },
      [&](std::size_t k, const Image& slice) { vol.set_slice(k, slice); }, progress);
  return vol;
}

Axis parse_axis(std::string_view name) {
  if (name == "x") return Axis::X;
  if (name == "y") return Axis::Y;
  if (name == "z") return Axis::Z;
  throw ParseError(fmt::format("unknown axis '{}'", name));
}

RenderMode parse_render_mode(std::string_view name) {
  if (name == "integral") return RenderMode::Integral;
  if (name == "max") return RenderMode::Max;
  throw ParseError(fmt::format("unknown render mode '{}'", name));
}

Image project_volume(const Volume& vol, Axis axis, RenderMode mode) {
  const std::size_t d = vol.depth(), h = vol.rows(), w = vol.cols();
  std::size_t out_h = 0, out_w = 0, len = 0;
  switch (axis) {
    case Axis::Z: out_h = h; out_w = w; len = d; break;
    case Axis::Y: out_h = d; out_w = w; len = h; break;
    case Axis::X: out_h = d; out_w = h; len = w; break;
  }
  auto voxel = [&](std::size_t a, std::size_t b, std::size_t i) -> double {
    switch (axis) {
      case Axis::Z: return vol.at(i, a, b);
      case Axis::Y: return vol.at(a, i, b);
      case Axis::X: return vol.at(a, b, i);
    }
    return 0.0;
  };
  std::vector<double> out(out_h * out_w, 0.0);
  for (std::size_t a = 0; a < out_h; ++a) {
    for (std::size_t b = 0; b < out_w; ++b) {
      double acc = mode == RenderMode::Max && len > 0 ? voxel(a, b, 0) : 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        const double v = voxel(a, b, i);
        acc = mode == RenderMode::Max ? std::max(acc, v) : acc + v;
      }
      out[a * out_w + b] = acc;
    }
  }
  return Image::real(out_h, out_w, std::move(out));
}

Image normalize_to_8bit(const Image& img) {
  std::vector<std::uint8_t> px(img.size(), 0);
  if (img.empty()) return Image::raw(img.height(), img.width(), std::move(px));
  double lo = std::max(0.0, img.at(0, 0));
  double hi = lo;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = std::max(0.0, img.at(i / img.width(), i % img.width()));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi > lo) {
    for (std::size_t i = 0; i < img.size(); ++i) {
      const double v = std::max(0.0, img.at(i / img.width(), i % img.width()));
      px[i] = static_cast<std::uint8_t>(std::lround(255.0 * (v - lo) / (hi - lo)));
    }
  }
  return Image::raw(img.height(), img.width(), std::move(px));
}

Image render_projection(const Volume& vol, Axis axis, RenderMode mode) {
  return normalize_to_8bit(project_volume(vol, axis, mode));
}

}  // namespace otomo::recon
