#include "otomo/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <regex>

#include <fmt/format.h>

#include "otomo/image_io.hpp"
#include "otomo/parallel.hpp"

namespace otomo::dataset {
namespace {

std::string escape_regex(std::string_view s) {
  static const std::string special = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : s) {
    if (special.find(c) != std::string::npos) out += '\\';
    out += c;
  }
  return out;
}

struct CompiledPattern {
  std::regex regex;
  int name_group = -1;
  int index_group = -1;
  int total_group = -1;
};

CompiledPattern compile(std::string_view pattern) {
  CompiledPattern out;
  std::string re;
  int group = 0;
  std::size_t pos = 0;
  while (pos < pattern.size()) {
    const std::size_t open = pattern.find('{', pos);
    if (open == std::string_view::npos) {
      re += escape_regex(pattern.substr(pos));
      break;
    }
    re += escape_regex(pattern.substr(pos, open - pos));
    const std::size_t close = pattern.find('}', open);
    if (close == std::string_view::npos) {
      throw ParseError(fmt::format("unterminated placeholder in pattern '{}'", pattern));
    }
    const std::string_view key = pattern.substr(open + 1, close - open - 1);
    ++group;
    if (key == "name") {
      re += "(.+)";
      out.name_group = group;
    } else if (key == "i") {
      re += "([0-9]+)";
      out.index_group = group;
    } else if (key == "N") {
      re += "([0-9]+)";
      out.total_group = group;
    } else if (key == "ext") {
      re += "([A-Za-z0-9]+)";
    } else {
      throw ParseError(fmt::format("unknown placeholder '{{{}}}' in pattern '{}'", key, pattern));
    }
    pos = close + 1;
  }
  if (out.index_group < 0 || out.total_group < 0) {
    throw ParseError(fmt::format("pattern '{}' must contain {{i}} and {{N}}", pattern));
  }
  out.regex = std::regex(re);
  return out;
}

std::size_t to_size(const std::string& digits, std::string_view filename) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) {
    throw ParseError(fmt::format("number '{}' in '{}' out of range", digits, filename));
  }
  return v;
}

double sample(const Image& img, double row, double col, Resampling resampling, double fill) {
  const auto h = static_cast<long>(img.height());
  const auto w = static_cast<long>(img.width());
  auto px = [&](long r, long c) {
    return (r < 0 || c < 0 || r >= h || c >= w) ? fill
                                                : img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  };
  if (resampling == Resampling::Nearest) {
    return px(std::lround(row), std::lround(col));
  }
  const double r0 = std::floor(row);
  const double c0 = std::floor(col);
  const double fy = row - r0;
  const double fx = col - c0;
  const auto ir = static_cast<long>(r0);
  const auto ic = static_cast<long>(c0);
  return (1 - fy) * ((1 - fx) * px(ir, ic) + fx * px(ir, ic + 1)) +
         fy * ((1 - fx) * px(ir + 1, ic) + fx * px(ir + 1, ic + 1));
}

}  // namespace

ParsedName parse_angle(std::string_view filename, std::string_view pattern) {
  const CompiledPattern compiled = compile(pattern);
  const std::string name(filename);
  std::smatch m;
  if (!std::regex_match(name, m, compiled.regex)) {
    throw ParseError(fmt::format("'{}' does not match pattern '{}'", filename, pattern));
  }
  ParsedName out;
  if (compiled.name_group > 0) out.name = m[compiled.name_group].str();
  out.index = to_size(m[compiled.index_group].str(), filename);
  out.total = to_size(m[compiled.total_group].str(), filename);
  if (out.total == 0 || out.index >= out.total) {
    throw ParseError(fmt::format("'{}': index {} not below total {}", filename, out.index, out.total));
  }
  out.angle_deg = 360.0 * static_cast<double>(out.index) / static_cast<double>(out.total);
  return out;
}

std::string format_stem(std::string_view name, std::size_t index, std::size_t total) {
  const std::size_t width = std::max<std::size_t>(4, fmt::formatted_size("{}", total));
  return fmt::format("{}_{:0{}}_of_{:0{}}", name, index, width, total, width);
}

std::string format_filename(std::string_view name, std::size_t index, std::size_t total,
                            std::string_view ext) {
  return fmt::format("{}.{}", format_stem(name, index, total), ext);
}

void AlignSpec::validate(std::size_t height, std::size_t width) const {
  if (!std::isfinite(rotation_deg)) throw ShapeError("rotation must be finite");
  if (!crop) return;
  if (crop->height < 1 || crop->width < 1 || crop->top + crop->height > height ||
      crop->left + crop->width > width) {
    throw ShapeError(fmt::format("crop (top={}, left={}, {}x{}) outside the {}x{} image", crop->top,
                                 crop->left, crop->height, crop->width, height, width));
  }
  if (axis_column) {
    const double center = static_cast<double>(crop->left) + 0.5 * static_cast<double>(crop->width - 1);
    if (std::abs(center - *axis_column) > 0.5) {
      throw ShapeError(fmt::format("crop centered on column {} is not symmetric about axis column {}",
                                   center, *axis_column));
    }
  }
}

nlohmann::json to_json(const AlignSpec& spec) {
  nlohmann::json j = {{"rotation", spec.rotation_deg}, {"crop", nullptr}, {"axis_column", nullptr}};
  if (spec.crop) {
    j["crop"] = {{"top", spec.crop->top},
                 {"left", spec.crop->left},
                 {"height", spec.crop->height},
                 {"width", spec.crop->width}};
  }
  if (spec.axis_column) j["axis_column"] = *spec.axis_column;
  return j;
}

AlignSpec align_from_json(const nlohmann::json& j) {
  try {
    AlignSpec spec;
    spec.rotation_deg = j.value("rotation", 0.0);
    if (j.contains("crop") && !j["crop"].is_null()) {
      const auto& c = j["crop"];
      spec.crop = Crop{c.at("top").get<std::size_t>(), c.at("left").get<std::size_t>(),
                       c.at("height").get<std::size_t>(), c.at("width").get<std::size_t>()};
    }
    if (j.contains("axis_column") && !j["axis_column"].is_null()) {
      spec.axis_column = j["axis_column"].get<double>();
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("invalid align spec: {}", e.what()));
  }
}

Image rotate(const Image& img, double degrees, Resampling resampling, double fill) {
  if (degrees == 0.0) return img;
  const double a = deg_to_rad(degrees);
  const double c = std::cos(a);
  const double s = std::sin(a);
  const std::size_t h = img.height(), w = img.width();
  std::vector<double> out(h * w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t col = 0; col < w; ++col) {
      const Point2 p = pixel_to_slice({static_cast<double>(r), static_cast<double>(col)}, h, w);
      // Inverse rotation maps the output position back into the source.
      const PixelPos src = slice_to_pixel({c * p.x + s * p.y, -s * p.x + c * p.y}, h, w);
      out[r * w + col] = sample(img, src.row, src.col, resampling, fill);
    }
  }
  if (!img.is_raw()) return Image::real(h, w, std::move(out));
  std::vector<std::uint8_t> px(out.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = static_cast<std::uint8_t>(std::clamp(std::round(out[i]), 0.0, 255.0));
  }
  return Image::raw(h, w, std::move(px));
}

Image align_and_crop(const Image& img, const AlignSpec& spec, Resampling resampling) {
  spec.validate(img.height(), img.width());
  Image rotated = rotate(img, spec.rotation_deg, resampling, img.is_raw() ? 255.0 : 0.0);
  if (!spec.crop) return rotated;
  return rotated.crop(spec.crop->top, spec.crop->left, spec.crop->height, spec.crop->width);
}

ProjectionStack load_stack(const std::filesystem::path& directory, std::string_view pattern,
                           const AlignSpec& align, LoadReport* report) {
  if (!std::filesystem::is_directory(directory)) {
    throw IoError(fmt::format("'{}' is not a directory", directory.string()));
  }
  struct Entry {
    ParsedName parsed;
    std::filesystem::path path;
  };
  std::map<std::size_t, Entry> by_index;
  LoadReport local;
  std::optional<std::size_t> total;
  for (const auto& de : std::filesystem::directory_iterator(directory)) {
    if (!de.is_regular_file()) continue;
    const std::string fname = de.path().filename().string();
    ParsedName parsed;
    try {
      parsed = parse_angle(fname, pattern);
    } catch (const ParseError&) {
      ++local.skipped;
      continue;
    }
    if (total && *total != parsed.total) {
      throw ParseError(fmt::format("'{}' claims {} images, others claim {}", fname, parsed.total, *total));
    }
    total = parsed.total;
    auto [it, inserted] = by_index.emplace(parsed.index, Entry{parsed, de.path()});
    if (!inserted) {
      throw ParseError(fmt::format("duplicate index {}: '{}' and '{}'", parsed.index,
                                   it->second.path.filename().string(), fname));
    }
  }
  if (by_index.size() < 2) {
    throw IoError(fmt::format("'{}' holds {} parseable images, need at least 2", directory.string(),
                              by_index.size()));
  }

  std::vector<Entry> entries;
  for (auto& [idx, e] : by_index) entries.push_back(std::move(e));

  ProjectionStack stack;
  stack.images.resize(entries.size());
  std::vector<char> color(entries.size(), 0);
  parallel_for(entries.size(), [&](std::size_t i) {
    io::PngReadInfo info;
    Image img = io::read_png_gray8(entries[i].path, &info);
    color[i] = info.converted_from_color ? 1 : 0;
    stack.images[i] = align_and_crop(img, align);
  });
  for (std::size_t i = 0; i < entries.size(); ++i) {
    stack.angles.push_back(deg_to_rad(entries[i].parsed.angle_deg));
    stack.sources.push_back(entries[i].path.filename().string());
    local.color_converted += static_cast<std::size_t>(color[i]);
  }
  local.files = entries.size();
  stack.validate();
  if (report) *report = local;
  return stack;
}

}  // namespace otomo::dataset
