#pragma once

// Multi-step workflows shared by the command line and the HTTP service:
// config (de)serialization, streaming reconstruction to disk, micrograph
// simulation into a directory and subset reconstruction from picks.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "otomo/cryosim.hpp"
#include "otomo/dataset_io.hpp"
#include "otomo/physics.hpp"
#include "otomo/recon.hpp"

namespace otomo::app {

// Fraction in [0, 1].
using Progress = std::function<void(double)>;

// Pick labels carry the angle the same way file names do, minus the extension.
inline constexpr std::string_view kLabelPattern = "{name}_{i}_of_{N}";

// Pretty-printed; ParseError names the file on malformed input.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

nlohmann::json to_json(const physics::PreprocessConfig& cfg);
// Missing keys keep their defaults; unknown names raise ParseError.
physics::PreprocessConfig preprocess_from_json(const nlohmann::json& j,
                                               physics::PreprocessConfig base = {});

nlohmann::json to_json(const recon::FbpOptions& opts);
recon::FbpOptions fbp_from_json(const nlohmann::json& j, recon::FbpOptions base = {});

recon::AngleHandling parse_angle_handling(std::string_view name);
std::string_view to_string(recon::AngleHandling handling);

// Accepts 180 or 360.
AngleSpan parse_angle_span(double degrees);

// File-name angles are 360 i / N; a half-turn scan maps them to 180 i / N.
void apply_angle_span(ProjectionStack& stack, AngleSpan span);

struct ReconstructRequest {
  physics::PreprocessConfig preprocess;  // used for raw stacks only
  recon::FbpOptions fbp;
  double detector_pitch = 1.0;
  std::size_t workers = 0;
  std::filesystem::path output;  // raw volume file; the sidecar goes next to it
  nlohmann::json provenance = nlohmann::json::object();
};

struct ReconstructSummary {
  std::size_t depth = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t clamped_pixels = 0;
  nlohmann::json provenance;
};

// Streams slices straight into the volume file. Raw stacks are converted to
// line integrals one sinogram at a time, so memory stays at the 8-bit stack
// plus one slice per worker.
ReconstructSummary reconstruct_to_file(const ProjectionStack& stack, const ReconstructRequest& req,
                                       const Progress& progress = {});

struct SimulateRequest {
  cryo::MicrographConfig config;
  bool noise = true;
  // Synthetic phantom patches, unless a preprocessed stack file is given.
  std::size_t patch_count = 800;
  std::size_t patch_height = 48;
  std::size_t patch_width = 64;
  std::optional<std::filesystem::path> patch_stack;
  std::filesystem::path output_dir;
  nlohmann::json provenance = nlohmann::json::object();
};

struct SimulateSummary {
  cryo::MicrographManifest manifest;
  std::uint64_t noise_seed = 0;
  double measured_snr = 0.0;  // 0 without noise
};

// Writes micrograph16.png (absorbance, noisy unless disabled),
// micrograph_clean16.png, micrograph.png (inverted 8-bit display),
// manifest.json and picks_truth.json (one labelled pick per placement).
SimulateSummary simulate_to_directory(const SimulateRequest& req);

// Noise seed derived from the placement seed, so one --seed fixes both.
std::uint64_t noise_seed_for(std::uint64_t seed);

// Inverted min-max display: high absorbance is dark.
Image display_image(const Image& absorbance);

std::vector<cryo::Pick> read_picks(const std::filesystem::path& path);
void write_picks(const std::filesystem::path& path, const std::vector<cryo::Pick>& picks,
                 const nlohmann::json& extra = nlohmann::json::object());
std::vector<cryo::Pick> picks_from_json(const nlohmann::json& j);
nlohmann::json picks_to_json(const std::vector<cryo::Pick>& picks);

// Every stride-th pick, starting at the first.
std::vector<cryo::Pick> every_nth(const std::vector<cryo::Pick>& picks, std::size_t stride);

// Angles (degrees) from pick labels via kLabelPattern, scaled to the span.
std::vector<double> angles_from_labels(const std::vector<cryo::Pick>& picks,
                                       AngleSpan span = AngleSpan::Full);

struct SubsetRequest {
  std::filesystem::path micrograph;  // 16-bit absorbance PNG
  std::vector<cryo::Pick> picks;
  std::optional<std::vector<double>> angles_deg;  // default: from labels
  AngleSpan span = AngleSpan::Full;
  recon::FilterSpec filter;
  std::filesystem::path output;
  nlohmann::json provenance = nlohmann::json::object();
};

Volume subset_to_file(const SubsetRequest& req, const Progress& progress = {});

}  // namespace otomo::app
