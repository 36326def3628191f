#pragma once

// Discrete forward Radon transform and analytic disk phantoms. The phantom
// sinograms are closed-form and serve as the reference for the discrete
// projector and for filtered back-projection.

#include <vector>

#include "otomo/core.hpp"

namespace otomo::radon {

struct Disk {
  Point2 center;
  double radius = 1.0;
  double density = 1.0;
};

struct Phantom {
  std::vector<Disk> disks;

  // Throws DomainError for nonpositive radii or disks leaving the support.
  void validate(double support_radius) const;

  // Pointwise density (sum over disks containing p).
  double density_at(Point2 p) const;
};

// Rasterize onto an n x n slice grid (pixel units, unit pitch). Each pixel
// holds the covered area fraction estimated with `supersample`^2 samples.
Image rasterize(const Phantom& phantom, std::size_t n, int supersample = 8);

// Line integrals of the bilinearly interpolated slice along every (t, theta)
// of the geometry, midpoint rule with step <= 0.5 px inside the support disk.
// Rays with |t| >= support_radius are exactly 0.
// Throws ShapeError for a non-square slice or a support larger than the slice.
Sinogram radon_forward(const Image& slice, const ScanGeometry& geometry);

// Same as above with an explicit (possibly non-uniform) angle list in radians.
Sinogram radon_forward(const Image& slice, const ScanGeometry& geometry,
                       std::vector<double> angles);

// Closed form: sum over disks of 2 c sqrt(r^2 - d^2), d the distance from the
// line to the disk center.
Sinogram phantom_sinogram(const Phantom& phantom, const ScanGeometry& geometry);
Sinogram phantom_sinogram(const Phantom& phantom, const ScanGeometry& geometry,
                          std::vector<double> angles);

double phantom_line_integral(const Phantom& phantom, const LineParam& line);

}  // namespace otomo::radon
