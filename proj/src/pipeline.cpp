#include "otomo/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "otomo/image_io.hpp"
#include "otomo/raw_io.hpp"

namespace otomo::app {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("'{}': {}", path.string(), e.what()));
  }
}

namespace {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("field '{}': {}", key, e.what()));
  }
}

}  // namespace

nlohmann::json to_json(const physics::PreprocessConfig& cfg) {
  return {{"gamma", cfg.camera.gamma},
          {"i_max", cfg.camera.i_max},
          {"v_floor", cfg.camera.v_floor},
          {"mode", std::string(physics::to_string(cfg.mode))},
          {"keep_scale", cfg.keep_scale},
          {"floor_policy", std::string(physics::to_string(cfg.floor_policy))}};
}

physics::PreprocessConfig preprocess_from_json(const nlohmann::json& j, physics::PreprocessConfig base) {
  if (!j.is_object()) throw ParseError("preprocessing config must be a JSON object");
  base.camera.gamma = get_or(j, "gamma", base.camera.gamma);
  base.camera.i_max = get_or(j, "i_max", base.camera.i_max);
  base.camera.v_floor = get_or(j, "v_floor", base.camera.v_floor);
  base.keep_scale = get_or(j, "keep_scale", base.keep_scale);
  if (j.contains("mode")) base.mode = physics::parse_preprocess_mode(get_or<std::string>(j, "mode", ""));
  if (j.contains("floor_policy")) {
    base.floor_policy = physics::parse_floor_policy(get_or<std::string>(j, "floor_policy", ""));
  }
  base.camera.validate();
  return base;
}

recon::AngleHandling parse_angle_handling(std::string_view name) {
  if (name == "average") return recon::AngleHandling::AverageAntipodes;
  if (name == "raw") return recon::AngleHandling::Raw;
  throw ParseError(fmt::format("unknown angle handling '{}' (average or raw)", name));
}

std::string_view to_string(recon::AngleHandling handling) {
  return handling == recon::AngleHandling::Raw ? "raw" : "average";
}

nlohmann::json to_json(const recon::FbpOptions& opts) {
  return {{"filter", std::string(recon::to_string(opts.filter.kind))},
          {"cutoff", opts.filter.cutoff},
          {"interpolation", std::string(recon::to_string(opts.interpolation))},
          {"angle_handling", std::string(to_string(opts.angle_handling))}};
}

recon::FbpOptions fbp_from_json(const nlohmann::json& j, recon::FbpOptions base) {
  if (j.is_null()) return base;
  if (!j.is_object()) throw ParseError("reconstruction options must be a JSON object");
  if (j.contains("filter")) base.filter.kind = recon::parse_filter_kind(get_or<std::string>(j, "filter", ""));
  base.filter.cutoff = get_or(j, "cutoff", base.filter.cutoff);
  if (j.contains("interpolation")) {
    base.interpolation = recon::parse_interpolation(get_or<std::string>(j, "interpolation", ""));
  }
  if (j.contains("angle_handling")) {
    base.angle_handling = parse_angle_handling(get_or<std::string>(j, "angle_handling", ""));
  }
  base.filter.validate();
  return base;
}

AngleSpan parse_angle_span(double degrees) {
  if (degrees == 180.0) return AngleSpan::Half;
  if (degrees == 360.0) return AngleSpan::Full;
  throw ParseError(fmt::format("angle span must be 180 or 360, got {}", degrees));
}

void apply_angle_span(ProjectionStack& stack, AngleSpan span) {
  if (span == AngleSpan::Full) return;
  for (double& a : stack.angles) a *= span_degrees(span) / 360.0;
}

ReconstructSummary reconstruct_to_file(const ProjectionStack& stack, const ReconstructRequest& req,
                                       const Progress& progress) {
  stack.validate();
  if (stack.count() < 2) throw ShapeError(fmt::format("need at least 2 images, got {}", stack.count()));
  const bool raw = stack.images.front().is_raw();
  for (const Image& img : stack.images) {
    if (img.is_raw() != raw) throw DomainError("stack mixes raw and preprocessed images");
  }

  recon::ReconJob job = recon::ReconJob::for_stack(stack, req.fbp);
  job.detector_pitch = req.detector_pitch;
  job.workers = req.workers;
  job.validate();

  const std::size_t h = job.height, w = job.width, n_img = job.count;
  std::array<double, 256> lut{};
  if (raw) lut = physics::radon_lookup(req.preprocess);
  const bool check_floor = raw && req.preprocess.mode == physics::PreprocessMode::Exact;
  const int floor = req.preprocess.camera.v_floor;
  const bool clamp = req.preprocess.floor_policy == physics::FloorPolicy::Clamp;
  std::atomic<std::size_t> clamped{0};

  std::vector<double> angles;
  for (double a : job.angles_deg) angles.push_back(deg_to_rad(a));
  ScanGeometry geometry = ScanGeometry::make(w, n_img, AngleSpan::Full, req.detector_pitch);

  ReconstructSummary summary{h, w, w, 0, req.provenance};
  io::VolumeWriter writer(req.output, h, w, w);

  recon::reconstruct_slices(
      job,
      [&](std::size_t k) {
        std::vector<double> v(w * n_img);
        std::size_t local_clamped = 0;
        for (std::size_t n = 0; n < n_img; ++n) {
          const Image& img = stack.images[n];
          if (!raw) {
            for (std::size_t j = 0; j < w; ++j) v[j * n_img + n] = img.real_at(k, j);
            continue;
          }
          const auto row = img.raw_pixels().subspan(k * w, w);
          for (std::size_t j = 0; j < w; ++j) {
            const std::uint8_t px = row[j];
            if (check_floor && px < floor) {
              if (!clamp) {
                const std::string where = n < stack.sources.size() ? stack.sources[n] : fmt::format("image {}", n);
                throw DomainError(fmt::format("{}: {}", where, SaturationError(k, j, px).what()));
              }
              ++local_clamped;
            }
            v[j * n_img + n] = lut[px];
          }
        }
        clamped += local_clamped;
        return Sinogram(geometry, angles, std::move(v));
      },
      [&](std::size_t k, const Image& slice) { writer.write_slice(k, slice); },
      [&](std::size_t done, std::size_t total) {
        if (progress) progress(static_cast<double>(done) / static_cast<double>(total));
      });

  summary.clamped_pixels = clamped;
  nlohmann::json prov = req.provenance.is_object() ? req.provenance : nlohmann::json::object();
  prov["fbp"] = to_json(req.fbp);
  if (raw) prov["preprocess"] = to_json(req.preprocess);
  prov["clamped_pixels"] = summary.clamped_pixels;
  prov["angles_deg"] = job.angles_deg;
  prov["detector_pitch"] = req.detector_pitch;
  if (!stack.sources.empty()) prov["sources"] = {stack.sources.front(), stack.sources.back()};
  summary.provenance = prov;
  writer.set_provenance(std::move(prov));
  writer.finish();
  return summary;
}

std::uint64_t noise_seed_for(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ULL; }

Image display_image(const Image& absorbance) {
  const Image real = absorbance.to_real();
  const auto v = real.values();
  std::vector<std::uint8_t> px(v.size(), 255);
  if (!v.empty()) {
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    const double lo = *mn, hi = *mx;
    if (hi > lo) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        px[i] = static_cast<std::uint8_t>(255 - std::lround(255.0 * (v[i] - lo) / (hi - lo)));
      }
    }
  }
  return Image::raw(real.height(), real.width(), std::move(px));
}

SimulateSummary simulate_to_directory(const SimulateRequest& req) {
  cryo::PatchSet set;
  if (req.patch_stack) {
    ProjectionStack stack = io::read_stack(*req.patch_stack);
    set.patches = std::move(stack.images);
    for (double a : stack.angles) set.angles_deg.push_back(rad_to_deg(a));
  } else {
    set = cryo::phantom_patches(req.patch_count, req.patch_height, req.patch_width);
  }

  auto [clean, manifest] = cryo::simulate_micrograph(set.patches, set.angles_deg, req.config);
  SimulateSummary summary;
  summary.manifest = manifest;
  summary.noise_seed = noise_seed_for(req.config.seed);

  std::filesystem::create_directories(req.output_dir);
  Image noisy = clean;
  if (req.noise) {
    noisy = cryo::add_noise(clean, req.config.snr, summary.noise_seed);
    std::vector<double> diff(clean.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = noisy.values()[i] - clean.values()[i];
    summary.measured_snr = cryo::variance(clean) / cryo::variance(Image::real(clean.height(), clean.width(), diff));
  }
  io::write_png_scaled16(req.output_dir / "micrograph16.png", noisy);
  io::write_png_scaled16(req.output_dir / "micrograph_clean16.png", clean);
  io::write_png_gray8(req.output_dir / "micrograph.png", display_image(noisy));

  nlohmann::json mj = cryo::to_json(manifest);
  mj["noise"] = req.noise;
  mj["noise_seed"] = summary.noise_seed;
  mj["measured_snr"] = summary.measured_snr;
  mj["patches"] = {{"count", set.patches.size()},
                   {"source", req.patch_stack ? req.patch_stack->string() : std::string("phantom")}};
  mj["provenance"] = req.provenance;
  write_json(req.output_dir / "manifest.json", mj);

  std::vector<std::size_t> all(manifest.placements.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  write_picks(req.output_dir / "picks_truth.json", cryo::picks_from_manifest(manifest, set.patches, all));
  return summary;
}

std::vector<cryo::Pick> picks_from_json(const nlohmann::json& j) {
  const nlohmann::json* list = &j;
  if (j.is_object()) {
    if (!j.contains("picks")) throw ParseError("picks document lacks a 'picks' array");
    list = &j.at("picks");
  }
  if (!list->is_array()) throw ParseError("picks must be a JSON array");
  std::vector<cryo::Pick> picks;
  for (const auto& p : *list) picks.push_back(cryo::pick_from_json(p));
  return picks;
}

nlohmann::json picks_to_json(const std::vector<cryo::Pick>& picks) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : picks) arr.push_back(cryo::to_json(p));
  return arr;
}

std::vector<cryo::Pick> read_picks(const std::filesystem::path& path) {
  return picks_from_json(read_json(path));
}

void write_picks(const std::filesystem::path& path, const std::vector<cryo::Pick>& picks,
                 const nlohmann::json& extra) {
  nlohmann::json j = extra.is_object() ? extra : nlohmann::json::object();
  j["picks"] = picks_to_json(picks);
  write_json(path, j);
}

std::vector<cryo::Pick> every_nth(const std::vector<cryo::Pick>& picks, std::size_t stride) {
  if (stride == 0) throw DomainError("stride must be at least 1");
  std::vector<cryo::Pick> out;
  for (std::size_t i = 0; i < picks.size(); i += stride) out.push_back(picks[i]);
  return out;
}

std::vector<double> angles_from_labels(const std::vector<cryo::Pick>& picks, AngleSpan span) {
  std::vector<double> angles;
  angles.reserve(picks.size());
  for (std::size_t i = 0; i < picks.size(); ++i) {
    if (picks[i].label.empty()) {
      throw ParseError(fmt::format("pick {} has no label to take its angle from", i));
    }
    angles.push_back(dataset::parse_angle(picks[i].label, kLabelPattern).angle_deg *
                     span_degrees(span) / 360.0);
  }
  return angles;
}

Volume subset_to_file(const SubsetRequest& req, const Progress& progress) {
  const Image micrograph = io::read_png_scaled16(req.micrograph);
  const std::vector<Image> images = cryo::extract_picks(micrograph, req.picks);
  const std::vector<double> angles = req.angles_deg ? *req.angles_deg : angles_from_labels(req.picks, req.span);
  const Volume vol = cryo::subset_reconstruct(images, angles, req.filter, [&](std::size_t done, std::size_t total) {
    if (progress) progress(static_cast<double>(done) / static_cast<double>(total));
  });
  nlohmann::json prov = req.provenance.is_object() ? req.provenance : nlohmann::json::object();
  prov["micrograph"] = req.micrograph.filename().string();
  prov["picks"] = req.picks.size();
  prov["angles_deg"] = angles;
  prov["filter"] = std::string(recon::to_string(req.filter.kind));
  prov["cutoff"] = req.filter.cutoff;
  io::write_volume(req.output, vol, prov);
  return vol;
}

}  // namespace otomo::app
