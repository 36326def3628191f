#pragma once

// Raw little-endian float32 arrays with JSON sidecars.
//
// Volume sidecar:
//   { "format": "otomo-volume", "dtype": "float32-le", "dims": [h, w, w],
//     "order": "depth-major, then row, then col", "data": "<raw file name>",
//     "provenance": {...} }
// Stack sidecar (preprocessed projections, image-major):
//   { "format": "otomo-stack", "dtype": "float32-le", "dims": [h, w, n],
//     "order": "image-major, then row, then col", "angles_deg": [...],
//     "sources": [...], "data": "<raw file name>", "provenance": {...} }
// Sinogram sidecar:
//   { "format": "otomo-sinogram", "dims": [n_detectors, n_angles],
//     "order": "detector-major, then angle", "angles_deg": [...], ... }

#include <cstdio>
#include <filesystem>
#include <memory>
#include <mutex>

#include <json.hpp>

#include "otomo/core.hpp"

namespace otomo::io {

// Sidecar path for a raw file: same stem, ".json" extension.
std::filesystem::path sidecar_path(const std::filesystem::path& raw_path);

void write_volume(const std::filesystem::path& raw_path, const Volume& vol,
                  const nlohmann::json& provenance = nlohmann::json::object());
// Accepts either the raw file or its sidecar.
Volume read_volume(const std::filesystem::path& path);
nlohmann::json read_sidecar(const std::filesystem::path& path);
// Reads slice k only. Throws ShapeError when k is out of range.
Image read_volume_slice(const std::filesystem::path& path, std::size_t k);

// Writes a volume slice by slice; slices may arrive in any order and from
// several threads. The sidecar is written by finish().
class VolumeWriter {
 public:
  VolumeWriter(std::filesystem::path raw_path, std::size_t depth, std::size_t rows,
               std::size_t cols, nlohmann::json provenance = nlohmann::json::object());
  ~VolumeWriter();
  VolumeWriter(const VolumeWriter&) = delete;
  VolumeWriter& operator=(const VolumeWriter&) = delete;

  void write_slice(std::size_t k, const Image& slice);
  // Replaces the provenance recorded by finish().
  void set_provenance(nlohmann::json provenance);
  void finish();

 private:
  std::filesystem::path raw_path_;
  std::size_t depth_, rows_, cols_;
  nlohmann::json provenance_;
  std::FILE* file_ = nullptr;
  std::mutex mutex_;
};

void write_stack(const std::filesystem::path& raw_path, const ProjectionStack& stack,
                 const nlohmann::json& provenance = nlohmann::json::object());
ProjectionStack read_stack(const std::filesystem::path& path);

void write_sinogram(const std::filesystem::path& raw_path, const Sinogram& sino,
                    const nlohmann::json& provenance = nlohmann::json::object());
Sinogram read_sinogram(const std::filesystem::path& path);

}  // namespace otomo::io
