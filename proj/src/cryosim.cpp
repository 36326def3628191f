#include "otomo/cryosim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <fmt/format.h>

#include "otomo/dataset_io.hpp"
#include "otomo/radon.hpp"

namespace otomo::cryo {
namespace {

struct Box {
  std::size_t top, left, height, width;

  bool intersects(const Box& o) const {
    return top < o.top + o.height && o.top < top + height && left < o.left + o.width &&
           o.left < left + width;
  }
};

void add_patch(Image& canvas, const Image& patch, std::size_t top, std::size_t left) {
  for (std::size_t r = 0; r < patch.height(); ++r) {
    for (std::size_t c = 0; c < patch.width(); ++c) {
      canvas.real_at(top + r, left + c) += patch.at(r, c);
    }
  }
}

}  // namespace

OverlapPolicy parse_overlap_policy(std::string_view name) {
  if (name == "allow") return OverlapPolicy::Allow;
  if (name == "reject") return OverlapPolicy::Reject;
  throw ParseError(fmt::format("unknown overlap policy '{}'", name));
}

std::string_view to_string(OverlapPolicy policy) {
  return policy == OverlapPolicy::Allow ? "allow" : "reject";
}

nlohmann::json to_json(const MicrographManifest& m) {
  nlohmann::json placements = nlohmann::json::array();
  for (const Placement& p : m.placements) {
    placements.push_back({{"patch", p.patch}, {"x", p.x}, {"y", p.y}, {"angle", p.angle_deg}});
  }
  return {{"canvas", {{"height", m.height}, {"width", m.width}}},
          {"snr", m.snr},
          {"seed", m.seed},
          {"overlap", std::string(to_string(m.overlap))},
          {"placements", std::move(placements)}};
}

MicrographManifest manifest_from_json(const nlohmann::json& j) {
  try {
    MicrographManifest m;
    m.height = j.at("canvas").at("height").get<std::size_t>();
    m.width = j.at("canvas").at("width").get<std::size_t>();
    m.snr = j.at("snr").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.overlap = parse_overlap_policy(j.value("overlap", "allow"));
    for (const auto& p : j.at("placements")) {
      m.placements.push_back({p.at("patch").get<std::size_t>(), p.at("x").get<std::size_t>(),
                              p.at("y").get<std::size_t>(), p.value("angle", 0.0)});
    }
    if (!(m.snr > 0.0)) throw DomainError("manifest snr must be positive");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("invalid manifest: {}", e.what()));
  }
}

nlohmann::json to_json(const Pick& pick) {
  nlohmann::json j = {{"top", pick.top}, {"left", pick.left}, {"height", pick.height}, {"width", pick.width}};
  if (!pick.label.empty()) j["label"] = pick.label;
  return j;
}

Pick pick_from_json(const nlohmann::json& j) {
  try {
    Pick p;
    p.top = j.at("top").get<std::size_t>();
    p.left = j.at("left").get<std::size_t>();
    p.height = j.at("height").get<std::size_t>();
    p.width = j.at("width").get<std::size_t>();
    p.label = j.value("label", "");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("invalid pick: {}", e.what()));
  }
}

void validate_pick(const Pick& pick, std::size_t height, std::size_t width) {
  if (pick.height < 1 || pick.width < 1 || pick.top + pick.height > height ||
      pick.left + pick.width > width) {
    throw ShapeError(fmt::format("pick '{}' (top={}, left={}, {}x{}) does not fit the {}x{} canvas",
                                 pick.label, pick.top, pick.left, pick.height, pick.width, height,
                                 width));
  }
}

PatchSet phantom_patches(std::size_t count, std::size_t height, std::size_t width) {
  if (count < 1 || height < 1 || width < 4) {
    throw ShapeError("phantom patches need count >= 1 and width >= 4");
  }
  const double w = static_cast<double>(width);
  const radon::Phantom section{{radon::Disk{{0.12 * w, 0.06 * w}, 0.16 * w, 1.0},
                                radon::Disk{{-0.16 * w, -0.1 * w}, 0.1 * w, 0.5}}};
  const ScanGeometry g = ScanGeometry::make(width, 1);
  const std::size_t top = height / 6, bottom = 5 * height / 6;
  PatchSet out;
  for (std::size_t i = 0; i < count; ++i) {
    const double deg = 360.0 * static_cast<double>(i) / static_cast<double>(count);
    std::vector<double> row(width);
    for (std::size_t c = 0; c < width; ++c) {
      row[c] = radon::phantom_line_integral(section, {g.detector_offset(c), deg_to_rad(deg)});
    }
    std::vector<double> v(height * width, 0.0);
    for (std::size_t r = top; r < bottom; ++r) std::copy(row.begin(), row.end(), v.begin() + r * width);
    out.patches.push_back(Image::real(height, width, std::move(v)));
    out.angles_deg.push_back(deg);
  }
  return out;
}

std::pair<Image, MicrographManifest> simulate_micrograph(const std::vector<Image>& patches,
                                                         const std::vector<double>& angles_deg,
                                                         const MicrographConfig& config) {
  if (patches.empty()) throw ShapeError("micrograph simulation needs at least one patch");
  if (config.count < 1) throw ShapeError("micrograph simulation needs count >= 1");
  if (!(config.snr > 0.0)) throw DomainError(fmt::format("snr must be positive, got {}", config.snr));
  if (!angles_deg.empty() && angles_deg.size() != patches.size()) {
    throw ShapeError(fmt::format("{} patches but {} angles", patches.size(), angles_deg.size()));
  }
  for (std::size_t i = 0; i < patches.size(); ++i) {
    if (patches[i].height() > config.height || patches[i].width() > config.width) {
      throw ShapeError(fmt::format("patch {} ({}x{}) larger than the {}x{} canvas", i,
                                   patches[i].height(), patches[i].width(), config.height,
                                   config.width));
    }
  }

  MicrographManifest manifest;
  manifest.height = config.height;
  manifest.width = config.width;
  manifest.snr = config.snr;
  manifest.seed = config.seed;
  manifest.overlap = config.overlap;

  std::mt19937_64 rng(config.seed);
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < config.count; ++i) {
    const std::size_t id = i % patches.size();
    const Image& patch = patches[id];
    std::uniform_int_distribution<std::size_t> row_dist(0, config.height - patch.height());
    std::uniform_int_distribution<std::size_t> col_dist(0, config.width - patch.width());
    Box box{};
    bool placed = false;
    const std::size_t attempts = config.overlap == OverlapPolicy::Reject ? config.max_attempts : 1;
    for (std::size_t a = 0; a < attempts && !placed; ++a) {
      box = {row_dist(rng), col_dist(rng), patch.height(), patch.width()};
      placed = config.overlap == OverlapPolicy::Allow ||
               std::none_of(boxes.begin(), boxes.end(), [&](const Box& b) { return b.intersects(box); });
    }
    if (!placed) {
      throw Error(fmt::format("could not place patch {} without overlap after {} attempts", i,
                              config.max_attempts));
    }
    boxes.push_back(box);
    manifest.placements.push_back(
        {id, box.left, box.top, angles_deg.empty() ? 0.0 : angles_deg[id]});
  }
  return {compose_micrograph(patches, manifest), std::move(manifest)};
}

Image compose_micrograph(const std::vector<Image>& patches, const MicrographManifest& manifest) {
  Image canvas = Image::real(manifest.height, manifest.width, 0.0);
  for (const Placement& p : manifest.placements) {
    if (p.patch >= patches.size()) {
      throw ShapeError(fmt::format("manifest references patch {} of {}", p.patch, patches.size()));
    }
    const Image& patch = patches[p.patch];
    if (p.y + patch.height() > manifest.height || p.x + patch.width() > manifest.width) {
      throw ShapeError(fmt::format("placement of patch {} at ({}, {}) leaves the canvas", p.patch,
                                   p.x, p.y));
    }
    add_patch(canvas, patch, p.y, p.x);
  }
  return canvas;
}

double variance(const Image& img) {
  if (img.empty()) return 0.0;
  const std::size_t n = img.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += img.at(i / img.width(), i % img.width());
  mean /= static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = img.at(i / img.width(), i % img.width()) - mean;
    acc += d * d;
  }
  return acc / static_cast<double>(n);
}

Image add_noise(const Image& img, double snr, std::uint64_t seed) {
  if (!(snr > 0.0)) throw DomainError(fmt::format("snr must be positive, got {}", snr));
  const double signal = variance(img);
  if (!(signal > 0.0)) throw DomainError("cannot set an SNR on a constant image");
  const double sigma = std::sqrt(signal / snr);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  Image out = img.to_real();
  for (double& v : out.values()) v += noise(rng);
  return out;
}

std::vector<Image> extract_picks(const Image& micrograph, const std::vector<Pick>& picks) {
  std::vector<Image> out;
  out.reserve(picks.size());
  for (std::size_t i = 0; i < picks.size(); ++i) {
    const Pick& p = picks[i];
    try {
      validate_pick(p, micrograph.height(), micrograph.width());
    } catch (const ShapeError& e) {
      throw ShapeError(fmt::format("pick {}: {}", i, e.what()));
    }
    out.push_back(micrograph.crop(p.top, p.left, p.height, p.width));
  }
  return out;
}

std::vector<Pick> picks_from_manifest(const MicrographManifest& manifest,
                                      const std::vector<Image>& patches,
                                      const std::vector<std::size_t>& placement_indices,
                                      const std::string& name) {
  std::vector<Pick> picks;
  picks.reserve(placement_indices.size());
  for (std::size_t idx : placement_indices) {
    if (idx >= manifest.placements.size()) {
      throw ShapeError(fmt::format("placement {} out of range ({})", idx, manifest.placements.size()));
    }
    const Placement& p = manifest.placements[idx];
    const Image& patch = patches.at(p.patch);
    picks.push_back({p.y, p.x, patch.height(), patch.width(),
                     dataset::format_stem(name, p.patch, patches.size())});
  }
  return picks;
}

Volume subset_reconstruct(const std::vector<Image>& picks, const std::vector<double>& angles_deg,
                          const recon::FilterSpec& filter, const recon::ProgressFn& progress) {
  if (picks.size() != angles_deg.size()) {
    throw ShapeError(fmt::format("{} picks but {} angles", picks.size(), angles_deg.size()));
  }
  ProjectionStack stack;
  std::set<double> distinct;
  for (std::size_t i = 0; i < picks.size(); ++i) {
    double a = std::fmod(angles_deg[i], 360.0);
    if (a < 0.0) a += 360.0;
    if (a >= 360.0) a = 0.0;
    distinct.insert(a);
    stack.images.push_back(picks[i].to_real());
    stack.angles.push_back(deg_to_rad(a));
  }
  if (distinct.size() < 2) {
    throw ShapeError(fmt::format("subset reconstruction needs at least 2 distinct angles, got {}",
                                 distinct.size()));
  }
  stack.validate();

  recon::FbpOptions options;
  options.filter = filter;
  const recon::ReconJob job = recon::ReconJob::for_stack(stack, options);
  return recon::reconstruct_volume(job, stack, progress);
}

}  // namespace otomo::cryo
