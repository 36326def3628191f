#pragma once

// Slice-by-slice filtered back-projection: reordering of a projection stack
// into per-row sinograms, the FBP kernel, volume assembly and static renders.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "otomo/core.hpp"
#include "otomo/ramp_filter.hpp"

namespace otomo::recon {

enum class Interpolation { Nearest, Linear };

// Raw: every angle is back-projected on its own. AverageAntipodes: rays
// (t, theta) and (-t, theta + 180 deg) are averaged first, folding 360 deg
// data into a 180 deg sinogram.
enum class AngleHandling { AverageAntipodes, Raw };

Interpolation parse_interpolation(std::string_view name);
std::string_view to_string(Interpolation interp);

struct FbpOptions {
  FilterSpec filter;
  Interpolation interpolation = Interpolation::Linear;
  AngleHandling angle_handling = AngleHandling::AverageAntipodes;
};

// Lazy (n_detectors x n_angles) view of row k across all images of a stack:
// sinogram k at (j, n) is pixel (k, j) of image n. Holds a reference; the
// stack must outlive the view.
class SinogramStack {
 public:
  explicit SinogramStack(const ProjectionStack& stack);

  std::size_t size() const { return stack_->height(); }
  std::size_t n_detectors() const { return stack_->width(); }
  std::size_t n_angles() const { return stack_->count(); }

  double at(std::size_t k, std::size_t j, std::size_t n) const { return stack_->images[n].at(k, j); }

  // Materializes sinogram k.
  Sinogram operator[](std::size_t k) const;

 private:
  const ProjectionStack* stack_;
};

// Throws ShapeError for heterogeneous image sizes.
SinogramStack stack_to_sinograms(const ProjectionStack& stack);

// Projections mapped onto [0, 180) deg with quadrature weights, ready for
// back-projection. Weights sum to pi.
struct WeightedProjections {
  std::vector<double> angles;                   // radians, sorted, in [0, pi)
  std::vector<double> weights;                  // radians
  std::vector<std::vector<double>> projections;
};

// Folds angles >= 180 deg onto their antipodes (mirroring t), optionally
// averages exact antipodal pairs, and assigns periodic trapezoidal weights
// (theta_{j+1} - theta_{j-1}) / 2 so uniform and non-uniform sets share one
// path. For a uniform grid every weight equals pi / n_effective.
WeightedProjections prepare_projections(const Sinogram& sino, AngleHandling handling);

// Reconstructs one n x n slice (n = detector count) inside the inscribed
// circle; pixels outside it are 0. Throws ShapeError for fewer than two
// angles and DomainError for non-finite input.
Image fbp_slice(const Sinogram& sino, const FbpOptions& options);

struct ReconJob {
  std::size_t height = 0;  // rows per image = number of slices
  std::size_t width = 0;   // detector samples
  std::size_t count = 0;   // images
  FbpOptions fbp;
  std::vector<double> angles_deg;
  double detector_pitch = 1.0;
  std::size_t workers = 0;  // 0 = hardware concurrency

  static ReconJob for_stack(const ProjectionStack& stack, FbpOptions options = {});

  // Throws ShapeError / DomainError on broken invariants.
  void validate() const;
};

class SliceError : public Error {
 public:
  SliceError(std::size_t slice, const std::string& what);
  std::size_t slice() const { return slice_; }

 private:
  std::size_t slice_;
};

using SliceSource = std::function<Sinogram(std::size_t)>;
using SliceSink = std::function<void(std::size_t, const Image&)>;
using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

// Streams slices through FBP without holding a volume. The sink may be
// called from worker threads, in any slice order.
void reconstruct_slices(const ReconJob& job, const SliceSource& source, const SliceSink& sink,
                        const ProgressFn& progress = {});

// Volume slice k = fbp_slice(sinogram k). Errors carry the slice index.
Volume reconstruct_volume(const ReconJob& job, const ProjectionStack& stack,
                          const ProgressFn& progress = {});

enum class Axis { X, Y, Z };
enum class RenderMode { Integral, Max };

Axis parse_axis(std::string_view name);
RenderMode parse_render_mode(std::string_view name);

// Sum or maximum along an axis. Z runs along the depth (rotation axis) and
// gives a rows x cols image; Y runs along rows (depth x cols); X along
// columns (depth x rows).
Image project_volume(const Volume& vol, Axis axis, RenderMode mode);

// Negative values clamped to 0, then min-max scaled to 0..255. A constant
// image maps to zeros.
Image normalize_to_8bit(const Image& img);

Image render_projection(const Volume& vol, Axis axis, RenderMode mode);

}  // namespace otomo::recon
