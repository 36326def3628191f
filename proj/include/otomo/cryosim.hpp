#pragma once

// Simulated single-particle micrographs: projection patches scattered over a
// canvas, additive Gaussian noise at a target SNR, box picking, and
// reconstruction from a picked subset with known angles.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "otomo/core.hpp"
#include "otomo/recon.hpp"

namespace otomo::cryo {

enum class OverlapPolicy { Allow, Reject };

OverlapPolicy parse_overlap_policy(std::string_view name);
std::string_view to_string(OverlapPolicy policy);

struct Placement {
  std::size_t patch = 0;
  std::size_t x = 0;  // left column
  std::size_t y = 0;  // top row
  double angle_deg = 0.0;

  friend bool operator==(const Placement&, const Placement&) = default;
};

struct MicrographManifest {
  std::size_t height = 0;
  std::size_t width = 0;
  double snr = 0.75;
  std::uint64_t seed = 0;
  OverlapPolicy overlap = OverlapPolicy::Allow;
  std::vector<Placement> placements;

  friend bool operator==(const MicrographManifest&, const MicrographManifest&) = default;
};

// {canvas: {height, width}, snr, seed, overlap, placements: [{patch, x, y, angle}]}
nlohmann::json to_json(const MicrographManifest& manifest);
MicrographManifest manifest_from_json(const nlohmann::json& j);

struct Pick {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 1;
  std::size_t width = 1;
  std::string label;

  friend bool operator==(const Pick&, const Pick&) = default;
};

nlohmann::json to_json(const Pick& pick);
Pick pick_from_json(const nlohmann::json& j);

// Throws ShapeError when the box is empty or leaves a height x width canvas.
void validate_pick(const Pick& pick, std::size_t height, std::size_t width);

struct MicrographConfig {
  std::size_t height = 4096;
  std::size_t width = 4096;
  std::size_t count = 800;
  double snr = 0.75;
  std::uint64_t seed = 0;
  OverlapPolicy overlap = OverlapPolicy::Allow;
  // Placement attempts per patch under OverlapPolicy::Reject.
  std::size_t max_attempts = 1000;
};

struct PatchSet {
  std::vector<Image> patches;
  std::vector<double> angles_deg;
};

// Synthetic particle: projections of a vertical cylinder whose cross-section
// holds two off-center disks, at angles 360 i / count. Each patch is
// height x width in absorbance units.
PatchSet phantom_patches(std::size_t count, std::size_t height = 48, std::size_t width = 64);

// Placement i uses patch i mod patches.size() at a uniformly drawn top-left
// position; patches add in the absorbance domain. Angles (degrees, one per
// patch, may be empty) are copied into the manifest. No noise is added; the
// manifest carries the target SNR for add_noise.
std::pair<Image, MicrographManifest> simulate_micrograph(const std::vector<Image>& patches,
                                                         const std::vector<double>& angles_deg,
                                                         const MicrographConfig& config);

// Re-composes the noise-free micrograph from a manifest.
Image compose_micrograph(const std::vector<Image>& patches, const MicrographManifest& manifest);

// img + n with n ~ N(0, var(img) / snr), seeded. Throws DomainError for a
// constant image or snr <= 0.
Image add_noise(const Image& img, double snr, std::uint64_t seed);

// Population variance of the values.
double variance(const Image& img);

// Copies the boxes, in order. Throws ShapeError naming the offending pick.
std::vector<Image> extract_picks(const Image& micrograph, const std::vector<Pick>& picks);

// One pick per selected placement, covering the patch footprint. Labels use
// the "<name>_<i>_of_<N>" convention so the angle travels with the pick.
std::vector<Pick> picks_from_manifest(const MicrographManifest& manifest,
                                      const std::vector<Image>& patches,
                                      const std::vector<std::size_t>& placement_indices,
                                      const std::string& name = "particle");

// Known-angle reconstruction from picked projections. Angles (degrees) need
// not be uniform; the FBP quadrature weights absorb the spacing. Throws
// ShapeError for mismatched dims or fewer than two distinct angles.
Volume subset_reconstruct(const std::vector<Image>& picks, const std::vector<double>& angles_deg,
                          const recon::FilterSpec& filter, const recon::ProgressFn& progress = {});

}  // namespace otomo::cryo
