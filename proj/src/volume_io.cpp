#include <bit>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "otomo/raw_io.hpp"

namespace otomo::io {
namespace {

static_assert(std::endian::native == std::endian::little,
              "raw float files are written in native order; add byte swapping for big-endian hosts");

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << j.dump(2) << '\n';
}

void write_floats(const std::filesystem::path& path, const std::vector<float>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) throw IoError(fmt::format("short write to '{}'", path.string()));
}

std::vector<float> read_floats(const std::filesystem::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
  std::vector<float> data(count);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(count * sizeof(float))) {
    throw IoError(fmt::format("'{}' holds fewer than {} floats", path.string(), count));
  }
  return data;
}

std::filesystem::path data_path(const std::filesystem::path& sidecar, const nlohmann::json& j) {
  return sidecar.parent_path() / j.at("data").get<std::string>();
}

void expect_format(const nlohmann::json& j, const char* format, const std::filesystem::path& p) {
  if (j.value("format", "") != format) {
    throw ParseError(fmt::format("'{}' is not an {} sidecar", p.string(), format));
  }
}

std::vector<double> to_degrees(std::span<const double> radians) {
  std::vector<double> out;
  out.reserve(radians.size());
  for (double a : radians) out.push_back(rad_to_deg(a));
  return out;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& raw_path) {
  auto p = raw_path;
  p.replace_extension(".json");
  return p;
}

nlohmann::json read_sidecar(const std::filesystem::path& path) {
  const auto json_path = path.extension() == ".json" ? path : sidecar_path(path);
  std::ifstream in(json_path);
  if (!in) throw IoError(fmt::format("cannot read '{}'", json_path.string()));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("'{}': {}", json_path.string(), e.what()));
  }
}

void write_volume(const std::filesystem::path& raw_path, const Volume& vol,
                  const nlohmann::json& provenance) {
  VolumeWriter writer(raw_path, vol.depth(), vol.rows(), vol.cols(), provenance);
  for (std::size_t k = 0; k < vol.depth(); ++k) writer.write_slice(k, vol.slice(k));
  writer.finish();
}

Volume read_volume(const std::filesystem::path& path) {
  const auto json_path = path.extension() == ".json" ? path : sidecar_path(path);
  const nlohmann::json j = read_sidecar(json_path);
  expect_format(j, "otomo-volume", json_path);
  const auto dims = j.at("dims").get<std::vector<std::size_t>>();
  if (dims.size() != 3) throw ParseError("volume dims must have three entries");
  Volume vol(dims[0], dims[1], dims[2]);
  const auto data = read_floats(data_path(json_path, j), vol.size());
  std::copy(data.begin(), data.end(), vol.voxels().begin());
  return vol;
}

Image read_volume_slice(const std::filesystem::path& path, std::size_t k) {
  const auto json_path = path.extension() == ".json" ? path : sidecar_path(path);
  const nlohmann::json j = read_sidecar(json_path);
  expect_format(j, "otomo-volume", json_path);
  const auto dims = j.at("dims").get<std::vector<std::size_t>>();
  if (dims.size() != 3) throw ParseError("volume dims must have three entries");
  if (k >= dims[0]) throw ShapeError(fmt::format("slice {} out of range ({})", k, dims[0]));
  const std::size_t n = dims[1] * dims[2];
  std::ifstream in(data_path(json_path, j), std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read volume data for '{}'", json_path.string()));
  in.seekg(static_cast<std::streamoff>(k * n * sizeof(float)));
  std::vector<float> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(n * sizeof(float))) {
    throw IoError(fmt::format("volume data for '{}' is truncated", json_path.string()));
  }
  return Image::real(dims[1], dims[2], std::vector<double>(buf.begin(), buf.end()));
}

VolumeWriter::VolumeWriter(std::filesystem::path raw_path, std::size_t depth, std::size_t rows,
                           std::size_t cols, nlohmann::json provenance)
    : raw_path_(std::move(raw_path)),
      depth_(depth),
      rows_(rows),
      cols_(cols),
      provenance_(std::move(provenance)) {
  file_ = std::fopen(raw_path_.c_str(), "wb");
  if (!file_) throw IoError(fmt::format("cannot write '{}'", raw_path_.string()));
}

VolumeWriter::~VolumeWriter() {
  if (file_) std::fclose(file_);
}

void VolumeWriter::write_slice(std::size_t k, const Image& slice) {
  if (k >= depth_ || slice.height() != rows_ || slice.width() != cols_) {
    throw ShapeError(fmt::format("slice {} ({}x{}) does not fit volume {}x{}x{}", k,
                                 slice.height(), slice.width(), depth_, rows_, cols_));
  }
  std::vector<float> buf(rows_ * cols_);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    buf[i] = static_cast<float>(slice.at(i / cols_, i % cols_));
  }
  std::lock_guard lock(mutex_);
  const auto offset = static_cast<long>(k * rows_ * cols_ * sizeof(float));
  if (std::fseek(file_, offset, SEEK_SET) != 0 ||
      std::fwrite(buf.data(), sizeof(float), buf.size(), file_) != buf.size()) {
    throw IoError(fmt::format("failed writing slice {} to '{}'", k, raw_path_.string()));
  }
}

void VolumeWriter::set_provenance(nlohmann::json provenance) {
  std::lock_guard lock(mutex_);
  provenance_ = std::move(provenance);
}

void VolumeWriter::finish() {
  std::lock_guard lock(mutex_);
  if (!file_) return;
  // Extend to full size even if trailing slices were never written.
  const auto total = static_cast<long>(depth_ * rows_ * cols_ * sizeof(float));
  std::fseek(file_, 0, SEEK_END);
  if (std::ftell(file_) < total && total > 0) {
    std::fseek(file_, total - 1, SEEK_SET);
    std::fputc(0, file_);
  }
  std::fclose(file_);
  file_ = nullptr;
  write_json(sidecar_path(raw_path_), {{"format", "otomo-volume"},
                                       {"dtype", "float32-le"},
                                       {"dims", {depth_, rows_, cols_}},
                                       {"order", "depth-major, then row, then col"},
                                       {"data", raw_path_.filename().string()},
                                       {"provenance", provenance_}});
}

void write_stack(const std::filesystem::path& raw_path, const ProjectionStack& stack,
                 const nlohmann::json& provenance) {
  stack.validate();
  std::vector<float> data;
  data.reserve(stack.count() * stack.height() * stack.width());
  for (const Image& img : stack.images) {
    for (std::size_t r = 0; r < img.height(); ++r) {
      for (std::size_t c = 0; c < img.width(); ++c) data.push_back(static_cast<float>(img.at(r, c)));
    }
  }
  write_floats(raw_path, data);
  write_json(sidecar_path(raw_path), {{"format", "otomo-stack"},
                                      {"dtype", "float32-le"},
                                      {"dims", {stack.height(), stack.width(), stack.count()}},
                                      {"order", "image-major, then row, then col"},
                                      {"angles_deg", to_degrees(stack.angles)},
                                      {"sources", stack.sources},
                                      {"data", raw_path.filename().string()},
                                      {"provenance", provenance}});
}

ProjectionStack read_stack(const std::filesystem::path& path) {
  const auto json_path = path.extension() == ".json" ? path : sidecar_path(path);
  const nlohmann::json j = read_sidecar(json_path);
  expect_format(j, "otomo-stack", json_path);
  const auto dims = j.at("dims").get<std::vector<std::size_t>>();
  if (dims.size() != 3) throw ParseError("stack dims must have three entries");
  const std::size_t h = dims[0], w = dims[1], n = dims[2];
  const auto data = read_floats(data_path(json_path, j), h * w * n);
  ProjectionStack stack;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(data.begin() + static_cast<std::ptrdiff_t>(i * h * w),
                          data.begin() + static_cast<std::ptrdiff_t>((i + 1) * h * w));
    stack.images.push_back(Image::real(h, w, std::move(v)));
  }
  for (double a : j.at("angles_deg").get<std::vector<double>>()) stack.angles.push_back(deg_to_rad(a));
  stack.sources = j.value("sources", std::vector<std::string>{});
  stack.validate();
  return stack;
}

void write_sinogram(const std::filesystem::path& raw_path, const Sinogram& sino,
                    const nlohmann::json& provenance) {
  std::vector<float> data(sino.values().begin(), sino.values().end());
  write_floats(raw_path, data);
  write_json(sidecar_path(raw_path), {{"format", "otomo-sinogram"},
                                      {"dtype", "float32-le"},
                                      {"dims", {sino.n_detectors(), sino.n_angles()}},
                                      {"order", "detector-major, then angle"},
                                      {"detector_pitch", sino.geometry().detector_pitch},
                                      {"angles_deg", to_degrees(sino.angles())},
                                      {"data", raw_path.filename().string()},
                                      {"provenance", provenance}});
}

Sinogram read_sinogram(const std::filesystem::path& path) {
  const auto json_path = path.extension() == ".json" ? path : sidecar_path(path);
  const nlohmann::json j = read_sidecar(json_path);
  expect_format(j, "otomo-sinogram", json_path);
  const auto dims = j.at("dims").get<std::vector<std::size_t>>();
  if (dims.size() != 2) throw ParseError("sinogram dims must have two entries");
  const auto data = read_floats(data_path(json_path, j), dims[0] * dims[1]);
  std::vector<double> angles;
  for (double a : j.at("angles_deg").get<std::vector<double>>()) angles.push_back(deg_to_rad(a));
  ScanGeometry g = ScanGeometry::make(dims[0], dims[1], AngleSpan::Full, j.value("detector_pitch", 1.0));
  return Sinogram(g, std::move(angles), std::vector<double>(data.begin(), data.end()));
}

}  // namespace otomo::io
