#include "otomo/service.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include <fmt/format.h>
#include <httplib.h>

#include "otomo/image_io.hpp"
#include "otomo/pipeline.hpp"
#include "otomo/raw_io.hpp"

namespace otomo::app {
namespace fs = std::filesystem;

namespace {

physics::PreprocessConfig service_default_preprocess() {
  physics::PreprocessConfig cfg;
  cfg.floor_policy = physics::FloorPolicy::Clamp;
  return cfg;
}

std::optional<std::uint64_t> expected_version(const nlohmann::json& body) {
  if (!body.is_object() || !body.contains("version") || body["version"].is_null()) return std::nullopt;
  if (!body["version"].is_number_unsigned()) throw ParseError("'version' must be a nonnegative integer");
  return body["version"].get<std::uint64_t>();
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("request body is not valid JSON: {}", e.what()));
  }
}

std::optional<std::uint64_t> version_query(const httplib::Request& req) {
  if (!req.has_param("version")) return std::nullopt;
  try {
    return std::stoull(req.get_param_value("version"));
  } catch (const std::exception&) {
    throw ParseError("query parameter 'version' must be an integer");
  }
}

std::size_t index_param(const std::string& s) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw NotFoundError(fmt::format("'{}' is not an index", s));
  }
}

void send_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, {{"error", message}, {"status", status}}, status);
}

template <typename Fn>
auto guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ConflictError& e) {
      send_error(res, 409, e.what());
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    } catch (const ParseError& e) {
      send_error(res, 400, e.what());
    } catch (const ShapeError& e) {
      send_error(res, 400, e.what());
    } catch (const DomainError& e) {
      send_error(res, 400, e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

nlohmann::json with_version(nlohmann::json j, std::uint64_t version) {
  j["version"] = version;
  return j;
}

}  // namespace

fs::path resolve_project_dir(const fs::path& fallback) {
  const char* env = std::getenv("OTOMO_DATA_DIR");
  if (env && *env) return fs::path(env);
  return fallback;
}

std::string_view to_string(JobStatus status) {
  switch (status) {
    case JobStatus::Queued: return "queued";
    case JobStatus::Running: return "running";
    case JobStatus::Done: return "done";
    case JobStatus::Failed: return "failed";
  }
  return "unknown";
}

nlohmann::json to_json(const JobInfo& job) {
  nlohmann::json j = {{"id", job.id},
                      {"kind", job.kind},
                      {"status", std::string(to_string(job.status))},
                      {"progress", job.progress},
                      {"params", job.params}};
  j["result"] = job.result.empty() ? nlohmann::json() : nlohmann::json(job.result);
  j["error"] = job.error.empty() ? nlohmann::json() : nlohmann::json(job.error);
  return j;
}

// ---------------------------------------------------------------------------
// ProjectState

ProjectState::ProjectState(fs::path root) : root_(std::move(root)), preprocess_(service_default_preprocess()) {
  if (!fs::is_directory(root_)) {
    throw IoError(fmt::format("project directory '{}' does not exist", root_.string()));
  }
  load();
}

fs::path ProjectState::volume_path(std::string_view which) const {
  if (which == "volume" || which.empty()) return root_ / "volume.raw";
  if (which == "subset") return root_ / "subset.raw";
  throw NotFoundError(fmt::format("unknown volume '{}'", which));
}

std::string ProjectState::pattern() const {
  const auto p = root_ / "project.json";
  if (fs::exists(p)) {
    std::ifstream in(p);
    try {
      const auto j = nlohmann::json::parse(in);
      if (j.contains("pattern")) return j["pattern"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(fmt::format("'{}': {}", p.string(), e.what()));
    }
  }
  return std::string(dataset::kDefaultPattern);
}

void ProjectState::load() {
  auto read = [&](const char* file) -> std::optional<nlohmann::json> {
    const auto p = root_ / file;
    if (!fs::exists(p)) return std::nullopt;
    std::ifstream in(p);
    try {
      return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(fmt::format("'{}': {}", p.string(), e.what()));
    }
  };
  if (auto j = read("align.json")) {
    align_ = dataset::align_from_json(*j);
    align_version_ = j->value("version", std::uint64_t{0});
  }
  if (auto j = read("preprocess.json")) {
    preprocess_ = preprocess_from_json(*j, service_default_preprocess());
    preprocess_version_ = j->value("version", std::uint64_t{0});
  }
  if (auto j = read("picks.json")) {
    picks_ = picks_from_json(*j);
    picks_version_ = j->is_object() ? j->value("version", std::uint64_t{0}) : 0;
  }
}

void ProjectState::persist(const char* file, const nlohmann::json& j) const {
  const auto target = root_ / file;
  const auto tmp = root_ / (std::string(".") + file + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw IoError(fmt::format("cannot write '{}'", tmp.string()));
    out << j.dump(2) << '\n';
  }
  fs::rename(tmp, target);
}

void ProjectState::check_version(std::uint64_t current, std::optional<std::uint64_t> expected) const {
  if (expected && *expected != current) {
    throw ConflictError(fmt::format("version {} is stale, current version is {}", *expected, current));
  }
}

ProjectState::Versioned ProjectState::align() const {
  std::lock_guard lock(mutex_);
  return {dataset::to_json(align_), align_version_};
}

ProjectState::Versioned ProjectState::preprocess() const {
  std::lock_guard lock(mutex_);
  return {to_json(preprocess_), preprocess_version_};
}

ProjectState::Versioned ProjectState::picks() const {
  std::lock_guard lock(mutex_);
  return {picks_to_json(picks_), picks_version_};
}

dataset::AlignSpec ProjectState::align_spec() const {
  std::lock_guard lock(mutex_);
  return align_;
}

physics::PreprocessConfig ProjectState::preprocess_config() const {
  std::lock_guard lock(mutex_);
  return preprocess_;
}

std::vector<cryo::Pick> ProjectState::pick_list() const {
  std::lock_guard lock(mutex_);
  return picks_;
}

std::vector<dataset::ParsedName> ProjectState::list_images() const {
  std::vector<dataset::ParsedName> out;
  for (const auto& f : image_files()) out.push_back(dataset::parse_angle(f, pattern()));
  return out;
}

std::vector<std::string> ProjectState::image_files() const {
  std::vector<std::pair<std::size_t, std::string>> found;
  const auto dir = images_dir();
  if (!fs::is_directory(dir)) return {};
  const std::string pat = pattern();
  for (const auto& de : fs::directory_iterator(dir)) {
    if (!de.is_regular_file()) continue;
    const std::string name = de.path().filename().string();
    try {
      found.emplace_back(dataset::parse_angle(name, pat).index, name);
    } catch (const ParseError&) {
    }
  }
  std::sort(found.begin(), found.end());
  std::vector<std::string> names;
  for (auto& [idx, name] : found) names.push_back(std::move(name));
  return names;
}

std::optional<std::pair<std::size_t, std::size_t>> ProjectState::micrograph_dims() const {
  const auto p = micrograph_dir() / "manifest.json";
  if (!fs::exists(p)) return std::nullopt;
  std::ifstream in(p);
  try {
    const auto j = nlohmann::json::parse(in);
    return std::pair{j.at("canvas").at("height").get<std::size_t>(), j.at("canvas").at("width").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("'{}': {}", p.string(), e.what()));
  }
}

ProjectState::Versioned ProjectState::put_align(const nlohmann::json& body) {
  if (!body.is_object()) throw ParseError("align spec must be a JSON object");
  const dataset::AlignSpec spec = dataset::align_from_json(body);
  const auto files = image_files();
  if (!files.empty()) {
    const Image first = io::read_png_gray8(images_dir() / files.front());
    spec.validate(first.height(), first.width());
  } else {
    spec.validate(std::size_t{1} << 40, std::size_t{1} << 40);
  }
  std::lock_guard lock(mutex_);
  check_version(align_version_, expected_version(body));
  align_ = spec;
  ++align_version_;
  const auto j = with_version(dataset::to_json(align_), align_version_);
  persist("align.json", j);
  return {dataset::to_json(align_), align_version_};
}

ProjectState::Versioned ProjectState::put_preprocess(const nlohmann::json& body) {
  const physics::PreprocessConfig cfg = preprocess_from_json(body, service_default_preprocess());
  std::lock_guard lock(mutex_);
  check_version(preprocess_version_, expected_version(body));
  preprocess_ = cfg;
  ++preprocess_version_;
  persist("preprocess.json", with_version(to_json(preprocess_), preprocess_version_));
  return {to_json(preprocess_), preprocess_version_};
}

namespace {

void validate_picks(const std::vector<cryo::Pick>& picks,
                    std::optional<std::pair<std::size_t, std::size_t>> dims) {
  for (std::size_t i = 0; i < picks.size(); ++i) {
    const auto& p = picks[i];
    if (p.height < 1 || p.width < 1) throw ShapeError(fmt::format("pick {} has an empty box", i));
    if (dims) {
      try {
        cryo::validate_pick(p, dims->first, dims->second);
      } catch (const ShapeError& e) {
        throw ShapeError(fmt::format("pick {}: {}", i, e.what()));
      }
    }
  }
}

}  // namespace

ProjectState::Versioned ProjectState::put_picks(const nlohmann::json& body) {
  const auto picks = picks_from_json(body);
  validate_picks(picks, micrograph_dims());
  std::lock_guard lock(mutex_);
  check_version(picks_version_, expected_version(body));
  picks_ = picks;
  ++picks_version_;
  write_picks(root_ / "picks.json", picks_, {{"version", picks_version_}});
  return {picks_to_json(picks_), picks_version_};
}

ProjectState::Versioned ProjectState::add_pick(const nlohmann::json& body) {
  const cryo::Pick pick = cryo::pick_from_json(body);
  validate_picks({pick}, micrograph_dims());
  std::lock_guard lock(mutex_);
  check_version(picks_version_, expected_version(body));
  picks_.push_back(pick);
  ++picks_version_;
  write_picks(root_ / "picks.json", picks_, {{"version", picks_version_}});
  return {picks_to_json(picks_), picks_version_};
}

ProjectState::Versioned ProjectState::clear_picks(std::optional<std::uint64_t> expected) {
  std::lock_guard lock(mutex_);
  check_version(picks_version_, expected);
  picks_.clear();
  ++picks_version_;
  write_picks(root_ / "picks.json", picks_, {{"version", picks_version_}});
  return {picks_to_json(picks_), picks_version_};
}

ProjectState::Versioned ProjectState::delete_pick(std::size_t index, std::optional<std::uint64_t> expected) {
  std::lock_guard lock(mutex_);
  if (index >= picks_.size()) throw NotFoundError(fmt::format("no pick {}", index));
  check_version(picks_version_, expected);
  picks_.erase(picks_.begin() + static_cast<std::ptrdiff_t>(index));
  ++picks_version_;
  write_picks(root_ / "picks.json", picks_, {{"version", picks_version_}});
  return {picks_to_json(picks_), picks_version_};
}

nlohmann::json ProjectState::summary() const {
  nlohmann::json volumes = nlohmann::json::object();
  for (const char* which : {"volume", "subset"}) {
    const auto p = volume_path(which);
    if (fs::exists(io::sidecar_path(p))) volumes[which] = io::read_sidecar(p).at("dims");
  }
  std::lock_guard lock(mutex_);
  return {{"root", root_.string()},
          {"pattern", pattern()},
          {"images", image_files().size()},
          {"micrograph", fs::exists(micrograph_dir() / "micrograph.png")},
          {"volumes", volumes},
          {"versions", {{"align", align_version_}, {"preprocess", preprocess_version_}, {"picks", picks_version_}}}};
}

// ---------------------------------------------------------------------------
// JobQueue

JobQueue::JobQueue() : worker_([this] { run(); }) {}

JobQueue::~JobQueue() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  worker_.join();
}

std::string JobQueue::submit(std::string kind, nlohmann::json params, Task task) {
  std::string id;
  {
    std::lock_guard lock(mutex_);
    id = fmt::format("job-{}", next_id_++);
    jobs_[id] = JobInfo{id, std::move(kind), JobStatus::Queued, 0.0, "", "", std::move(params)};
    queue_.emplace_back(id, std::move(task));
  }
  cv_.notify_all();
  return id;
}

std::optional<JobInfo> JobQueue::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::vector<JobInfo> JobQueue::list() const {
  std::lock_guard lock(mutex_);
  std::vector<JobInfo> out;
  for (const auto& [id, job] : jobs_) out.push_back(job);
  return out;
}

JobInfo JobQueue::wait(const std::string& id) const {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] {
    const auto it = jobs_.find(id);
    return it == jobs_.end() || it->second.status == JobStatus::Done || it->second.status == JobStatus::Failed;
  });
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) throw NotFoundError(fmt::format("no job '{}'", id));
  return it->second;
}

void JobQueue::run() {
  for (;;) {
    std::pair<std::string, Task> next;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      next = std::move(queue_.front());
      queue_.pop_front();
      jobs_[next.first].status = JobStatus::Running;
    }
    cv_.notify_all();
    const std::string& id = next.first;
    auto progress = [&](double f) {
      std::lock_guard lock(mutex_);
      auto& job = jobs_[id];
      job.progress = std::clamp(f, job.progress, 1.0);
    };
    std::string result, error;
    bool ok = true;
    try {
      result = next.second(progress);
    } catch (const std::exception& e) {
      ok = false;
      error = e.what();
    }
    {
      std::lock_guard lock(mutex_);
      auto& job = jobs_[id];
      job.status = ok ? JobStatus::Done : JobStatus::Failed;
      if (ok) job.progress = 1.0;
      job.result = result;
      job.error = error;
    }
    cv_.notify_all();
  }
}

// ---------------------------------------------------------------------------
// Service

Service::Service(ServiceConfig config)
    : config_(std::move(config)), project_(config_.project_dir), server_(std::make_unique<httplib::Server>()) {
  routes();
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw IoError(fmt::format("cannot bind to {}", host));
    return bound;
  }
  if (!server_->bind_to_port(host, port)) throw IoError(fmt::format("cannot bind to {}:{}", host, port));
  return port;
}

void Service::listen() { server_->listen_after_bind(); }

void Service::start() {
  thread_ = std::thread([this] { listen(); });
  server_->wait_until_ready();
}

void Service::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

void Service::routes() {
  httplib::Server& s = *server_;
  ProjectState& p = project_;

  s.Get("/api/project", guarded([&p](const httplib::Request&, httplib::Response& res) { send_json(res, p.summary()); }));

  s.Get("/api/images", guarded([&p](const httplib::Request&, httplib::Response& res) {
    const auto files = p.image_files();
    nlohmann::json list = nlohmann::json::array();
    for (std::size_t i = 0; i < files.size(); ++i) {
      const auto parsed = dataset::parse_angle(files[i], p.pattern());
      list.push_back({{"index", i}, {"file", files[i]}, {"angle_deg", parsed.angle_deg}, {"total", parsed.total}});
    }
    send_json(res, {{"count", files.size()}, {"images", list}});
  }));

  s.Get(R"(/api/images/([^/]+))", guarded([&p](const httplib::Request& req, httplib::Response& res) {
    const auto files = p.image_files();
    const std::size_t i = index_param(req.matches[1]);
    if (i >= files.size()) throw NotFoundError(fmt::format("no image {} ({} images)", i, files.size()));
    Image img = io::read_png_gray8(p.images_dir() / files[i]);
    if (req.has_param("aligned") && req.get_param_value("aligned") != "0") {
      img = dataset::align_and_crop(img, p.align_spec());
    }
    const auto bytes = io::encode_png_gray8(img);
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
  }));

  s.Get("/api/align", guarded([&p](const httplib::Request&, httplib::Response& res) {
    const auto v = p.align();
    send_json(res, with_version(v.value, v.version));
  }));
  s.Put("/api/align", guarded([&p](const httplib::Request& req, httplib::Response& res) {
    const auto v = p.put_align(parse_body(req));
    send_json(res, with_version(v.value, v.version));
  }));

  s.Get("/api/preprocess", guarded([&p](const httplib::Request&, httplib::Response& res) {
    const auto v = p.preprocess();
    send_json(res, with_version(v.value, v.version));
  }));
  s.Put("/api/preprocess", guarded([&p](const httplib::Request& req, httplib::Response& res) {
    const auto v = p.put_preprocess(parse_body(req));
    send_json(res, with_version(v.value, v.version));
  }));

  auto picks_response = [](httplib::Response& res, const ProjectState::Versioned& v) {
    send_json(res, {{"version", v.version}, {"picks", v.value}});
  };
  s.Get("/api/picks", guarded([&p, picks_response](const httplib::Request&, httplib::Response& res) {
    picks_response(res, p.picks());
  }));
  // A {"picks": [...]} body replaces the list; a single pick object appends.
  s.Post("/api/picks", guarded([&p, picks_response](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    if (body.is_array() || (body.is_object() && body.contains("picks"))) {
      picks_response(res, p.put_picks(body));
    } else {
      picks_response(res, p.add_pick(body));
    }
  }));
  s.Delete("/api/picks", guarded([&p, picks_response](const httplib::Request& req, httplib::Response& res) {
    picks_response(res, p.clear_picks(version_query(req)));
  }));
  s.Delete(R"(/api/picks/([^/]+))", guarded([&p, picks_response](const httplib::Request& req, httplib::Response& res) {
    picks_response(res, p.delete_pick(index_param(req.matches[1]), version_query(req)));
  }));

  const std::size_t workers = config_.workers;
  s.Post(R"(/api/jobs/([^/]+))", guarded([this, &p, workers](const httplib::Request& req, httplib::Response& res) {
    const std::string kind = req.matches[1];
    const nlohmann::json body = parse_body(req);
    if (!body.is_object()) throw ParseError("job parameters must be a JSON object");
    std::string id;

    if (kind == "reconstruct") {
      if (p.image_files().size() < 2) throw ParseError("no stack loaded: the project needs at least 2 images");
      ReconstructRequest rr;
      rr.fbp = fbp_from_json(body);
      rr.preprocess = p.preprocess_config();
      rr.workers = workers;
      rr.output = p.volume_path("volume");
      const AngleSpan span = parse_angle_span(body.value("angles_span", 360.0));
      const dataset::AlignSpec align = p.align_spec();
      const std::string pattern = p.pattern();
      const fs::path dir = p.images_dir();
      rr.provenance = {{"align", dataset::to_json(align)}, {"angles_span", span_degrees(span)}};
      id = jobs_.submit(kind, body, [rr, align, pattern, dir, span](const auto& progress) {
        ProjectionStack stack = dataset::load_stack(dir, pattern, align);
        apply_angle_span(stack, span);
        reconstruct_to_file(stack, rr, progress);
        return std::string("volume.raw");
      });
    } else if (kind == "subset-reconstruct") {
      const fs::path micrograph = p.micrograph_dir() / "micrograph16.png";
      if (!fs::exists(micrograph)) throw ParseError("no micrograph: run a simulate job first");
      SubsetRequest sr;
      sr.micrograph = micrograph;
      sr.picks = p.pick_list();
      if (sr.picks.size() < 2) throw ParseError("subset reconstruction needs at least 2 picks");
      if (body.contains("angles")) {
        sr.angles_deg = body["angles"].get<std::vector<double>>();
      } else {
        sr.angles_deg = angles_from_labels(sr.picks, parse_angle_span(body.value("angles_span", 360.0)));
      }
      if (sr.angles_deg->size() != sr.picks.size()) {
        throw ParseError(fmt::format("{} picks but {} angles", sr.picks.size(), sr.angles_deg->size()));
      }
      sr.filter = fbp_from_json(body).filter;
      sr.output = p.volume_path("subset");
      id = jobs_.submit(kind, body, [sr](const auto& progress) {
        subset_to_file(sr, progress);
        return std::string("subset.raw");
      });
    } else if (kind == "simulate") {
      SimulateRequest sr;
      sr.config.count = body.value("count", sr.config.count);
      sr.config.snr = body.value("snr", sr.config.snr);
      sr.config.seed = body.value("seed", sr.config.seed);
      sr.config.height = body.value("height", sr.config.height);
      sr.config.width = body.value("width", sr.config.width);
      sr.config.overlap = cryo::parse_overlap_policy(body.value("overlap", std::string("allow")));
      sr.noise = body.value("noise", true);
      sr.patch_count = body.value("patch_count", sr.patch_count);
      sr.patch_height = body.value("patch_height", sr.patch_height);
      sr.patch_width = body.value("patch_width", sr.patch_width);
      if (!(sr.config.snr > 0.0)) throw DomainError("snr must be positive");
      if (sr.config.count < 1) throw DomainError("count must be at least 1");
      sr.output_dir = p.micrograph_dir();
      sr.provenance = body;
      id = jobs_.submit(kind, body, [sr](const auto& progress) {
        simulate_to_directory(sr);
        progress(1.0);
        return std::string("micrograph/micrograph16.png");
      });
    } else {
      throw NotFoundError(fmt::format("unknown job kind '{}'", kind));
    }
    send_json(res, to_json(*jobs_.get(id)), 202);
  }));

  s.Get("/api/jobs", guarded([this](const httplib::Request&, httplib::Response& res) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& job : jobs_.list()) list.push_back(to_json(job));
    send_json(res, list);
  }));
  s.Get(R"(/api/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto job = jobs_.get(req.matches[1]);
    if (!job) throw NotFoundError(fmt::format("no job '{}'", req.matches[1].str()));
    send_json(res, to_json(*job));
  }));

  auto volume_file = [&p](const httplib::Request& req) {
    const auto path = p.volume_path(req.has_param("source") ? req.get_param_value("source") : "volume");
    if (!fs::exists(io::sidecar_path(path))) throw NotFoundError("no reconstructed volume yet");
    return path;
  };
  s.Get("/api/volume", guarded([volume_file](const httplib::Request& req, httplib::Response& res) {
    send_json(res, io::read_sidecar(volume_file(req)));
  }));
  s.Get(R"(/api/volume/slice/([^/]+))", guarded([volume_file](const httplib::Request& req, httplib::Response& res) {
    const auto path = volume_file(req);
    const std::size_t k = index_param(req.matches[1]);
    Image slice;
    try {
      slice = io::read_volume_slice(path, k);
    } catch (const ShapeError& e) {
      throw NotFoundError(e.what());
    }
    const auto bytes = io::encode_png_gray8(recon::normalize_to_8bit(slice));
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
  }));

  s.Get("/api/micrograph", guarded([&p](const httplib::Request&, httplib::Response& res) {
    const auto path = p.micrograph_dir() / "micrograph.png";
    if (!fs::exists(path)) throw NotFoundError("no micrograph yet");
    std::ifstream in(path, std::ios::binary);
    res.set_content(std::string(std::istreambuf_iterator<char>(in), {}), "image/png");
  }));
  s.Get("/api/micrograph/manifest", guarded([&p](const httplib::Request&, httplib::Response& res) {
    const auto path = p.micrograph_dir() / "manifest.json";
    if (!fs::exists(path)) throw NotFoundError("no micrograph yet");
    std::ifstream in(path);
    send_json(res, nlohmann::json::parse(in));
  }));

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_error(res, res.status, httplib::status_message(res.status));
  });

  if (config_.ui_dir) {
    if (!s.set_mount_point("/", config_.ui_dir->string())) {
      throw IoError(fmt::format("UI directory '{}' does not exist", config_.ui_dir->string()));
    }
  }
}

}  // namespace otomo::app
