#include <openssl/evp.h>

#include <fstream>
#include <memory>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "otomo/dataset_io.hpp"
#include "otomo/parallel.hpp"

namespace otomo::dataset {
namespace {

struct DigestCtx {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  DigestCtx() {
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 init failed");
  }
  ~DigestCtx() { EVP_MD_CTX_free(ctx); }
  DigestCtx(const DigestCtx&) = delete;
  DigestCtx& operator=(const DigestCtx&) = delete;

  void update(const void* data, std::size_t len) {
    if (EVP_DigestUpdate(ctx, data, len) != 1) throw Error("SHA-256 update failed");
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx, md, &len) != 1) throw Error("SHA-256 final failed");
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
    return out;
  }
};

bool is_hex64(const std::string& s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

// Splits "scheme://host[:port]/prefix" into the client origin and path prefix.
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ParseError(fmt::format("base URL '{}' lacks a scheme", url));
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

bool verified(const std::filesystem::path& path, const std::string& sha) {
  std::error_code ec;
  return std::filesystem::is_regular_file(path, ec) && sha256_file(path) == sha;
}

}  // namespace

FetchError::FetchError(std::string file, const std::string& what)
    : IoError(fmt::format("{}: {}", file, what)), file_(std::move(file)) {}

void DatasetDescriptor::validate() const {
  if (name.empty()) throw ParseError("dataset descriptor needs a name");
  if (files.empty()) throw ParseError(fmt::format("dataset '{}' lists no files", name));
  for (const DatasetFile& f : files) {
    if (f.name.empty() || f.name.find('/') != std::string::npos || f.name == "..") {
      throw ParseError(fmt::format("invalid file name '{}' in dataset '{}'", f.name, name));
    }
    if (!is_hex64(f.sha256)) {
      throw ParseError(fmt::format("checksum of '{}' is not 64 lowercase hex characters", f.name));
    }
  }
}

nlohmann::json to_json(const DatasetDescriptor& desc) {
  nlohmann::json files = nlohmann::json::array();
  for (const DatasetFile& f : desc.files) files.push_back({{"name", f.name}, {"sha256", f.sha256}});
  return {{"name", desc.name},
          {"base_url", desc.base_url},
          {"angle_pattern", desc.angle_pattern},
          {"files", std::move(files)}};
}

DatasetDescriptor descriptor_from_json(const nlohmann::json& j) {
  try {
    DatasetDescriptor d;
    d.name = j.at("name").get<std::string>();
    d.base_url = j.at("base_url").get<std::string>();
    d.angle_pattern = j.value("angle_pattern", std::string(kDefaultPattern));
    for (const auto& f : j.at("files")) {
      d.files.push_back({f.at("name").get<std::string>(), f.at("sha256").get<std::string>()});
    }
    d.validate();
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("invalid dataset descriptor: {}", e.what()));
  }
}

std::string sha256_hex(std::string_view bytes) {
  DigestCtx d;
  d.update(bytes.data(), bytes.size());
  return d.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
  DigestCtx d;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    d.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return d.hex();
}

FetchResult fetch_dataset(const DatasetDescriptor& desc, const std::filesystem::path& destination,
                          const FetchOptions& options) {
  desc.validate();
  const auto dir = destination / desc.name;
  std::filesystem::create_directories(dir);
  const auto [origin, prefix] = split_url(desc.base_url);

  FetchResult result;
  result.paths.resize(desc.files.size());
  std::vector<char> downloaded(desc.files.size(), 0);

  parallel_for(
      desc.files.size(),
      [&, &origin = origin, &prefix = prefix](std::size_t i) {
        const DatasetFile& f = desc.files[i];
        const auto target = dir / f.name;
        result.paths[i] = target;
        if (verified(target, f.sha256)) return;

        httplib::Client client(origin);
        client.set_connection_timeout(options.timeout_seconds);
        client.set_read_timeout(options.timeout_seconds);
        client.set_follow_location(true);

        std::string last_error;
        httplib::Result res;
        const std::size_t attempts = options.retries + 1;
        for (std::size_t a = 0; a < attempts; ++a) {
          res = client.Get(prefix + "/" + f.name);
          if (res && res->status == 200) break;
          last_error = res ? fmt::format("HTTP {}", res->status) : httplib::to_string(res.error());
          res = httplib::Result();
        }
        if (!res) {
          throw FetchError(f.name, fmt::format("download failed after {} attempts ({} retries): {}",
                                               attempts, options.retries, last_error));
        }

        const auto partial = dir / fmt::format(".{}.part", f.name);
        {
          std::ofstream out(partial, std::ios::binary | std::ios::trunc);
          out.write(res->body.data(), static_cast<std::streamsize>(res->body.size()));
          if (!out) throw FetchError(f.name, fmt::format("cannot write '{}'", partial.string()));
        }
        const std::string actual = sha256_file(partial);
        if (actual != f.sha256) {
          std::filesystem::remove(partial);
          throw FetchError(f.name, fmt::format("checksum mismatch: expected {}, got {}", f.sha256, actual));
        }
        std::filesystem::rename(partial, target);
        downloaded[i] = 1;
      },
      std::max<std::size_t>(1, options.parallelism));

  for (char d : downloaded) {
    if (d) ++result.downloaded;
    else ++result.skipped;
  }
  return result;
}

}  // namespace otomo::dataset
