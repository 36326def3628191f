#pragma once

// Recorded datasets: filename <-> angle mapping, rotation-axis alignment and
// cropping, loading a directory into a projection stack, and downloading a
// published sample set with checksum verification.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "otomo/core.hpp"

namespace otomo::dataset {

// Template with placeholders {name}, {i}, {N} and {ext}; {i} and {N} are
// required and match decimal digits.
inline constexpr std::string_view kDefaultPattern = "{name}_{i}_of_{N}.{ext}";

struct ParsedName {
  std::string name;
  std::size_t index = 0;
  std::size_t total = 0;
  double angle_deg = 0.0;  // 360 * index / total
};

// Throws ParseError for a non-matching filename or index >= total.
ParsedName parse_angle(std::string_view filename, std::string_view pattern = kDefaultPattern);

// "<name>_<i>_of_<N>" with both numbers zero-padded to max(4, digits(N)).
std::string format_stem(std::string_view name, std::size_t index, std::size_t total);
std::string format_filename(std::string_view name, std::size_t index, std::size_t total,
                            std::string_view ext = "png");

struct Crop {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  friend bool operator==(const Crop&, const Crop&) = default;
};

struct AlignSpec {
  // Counter-clockwise rotation (degrees) that makes the rotation axis vertical.
  double rotation_deg = 0.0;
  // Unset means the full frame.
  std::optional<Crop> crop;
  // Column of the rotation axis after rotation. When set, the crop must be
  // centered on it within half a pixel.
  std::optional<double> axis_column;

  // Throws ShapeError if the crop leaves a height x width image or is not
  // symmetric about the axis column.
  void validate(std::size_t height, std::size_t width) const;

  friend bool operator==(const AlignSpec&, const AlignSpec&) = default;
};

nlohmann::json to_json(const AlignSpec& spec);
AlignSpec align_from_json(const nlohmann::json& j);

enum class Resampling { Nearest, Bilinear };

// Rotates content counter-clockwise about the image center. Samples falling
// outside the source take `fill`. Raw images are rounded back to 8 bits.
Image rotate(const Image& img, double degrees, Resampling resampling, double fill);

// Rotate (fill 255 for raw, 0 for real), then crop.
Image align_and_crop(const Image& img, const AlignSpec& spec,
                     Resampling resampling = Resampling::Bilinear);

struct LoadReport {
  std::size_t files = 0;
  std::size_t skipped = 0;          // names not matching the pattern
  std::size_t color_converted = 0;  // color PNGs reduced to luminance
};

// Loads every pattern-matching PNG in `directory`, sorted by angle, with the
// alignment applied. Throws on fewer than two files, duplicate indices,
// inconsistent totals or heterogeneous dims after cropping.
ProjectionStack load_stack(const std::filesystem::path& directory,
                           std::string_view pattern = kDefaultPattern,
                           const AlignSpec& align = {}, LoadReport* report = nullptr);

struct DatasetFile {
  std::string name;
  std::string sha256;  // 64 lowercase hex characters
};

struct DatasetDescriptor {
  std::string name;
  std::string base_url;
  std::vector<DatasetFile> files;
  std::string angle_pattern{kDefaultPattern};

  void validate() const;
};

nlohmann::json to_json(const DatasetDescriptor& desc);
DatasetDescriptor descriptor_from_json(const nlohmann::json& j);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

struct FetchOptions {
  std::size_t parallelism = 4;
  std::size_t retries = 3;
  int timeout_seconds = 30;
};

struct FetchResult {
  std::vector<std::filesystem::path> paths;  // in descriptor order
  std::size_t downloaded = 0;
  std::size_t skipped = 0;  // already present and verified
};

class FetchError : public IoError {
 public:
  FetchError(std::string file, const std::string& what);
  const std::string& file() const { return file_; }

 private:
  std::string file_;
};

// Downloads into <destination>/<name>/<file>. Files already present with a
// matching checksum are not requested again. Downloads go to a temporary
// file that is renamed only after verification.
FetchResult fetch_dataset(const DatasetDescriptor& desc, const std::filesystem::path& destination,
                          const FetchOptions& options = {});

}  // namespace otomo::dataset
