#pragma once

// HTTP service behind the browser UI. Project state lives in a directory so
// the command line and the UI share the same artifacts:
//
//   images/                  recorded PNGs named by the angle pattern
//   align.json               AlignSpec plus "version"
//   preprocess.json          PreprocessConfig plus "version"
//   picks.json               {"version": n, "picks": [...]}
//   micrograph/              output of the simulate job
//   volume.raw, volume.json  output of the reconstruct job
//   subset.raw, subset.json  output of the subset-reconstruct job
//
// Mutations are serialized. A PUT/POST body may carry "version"; if it does
// not match the stored counter the request fails with 409, otherwise the
// last writer wins and the counter increments.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "otomo/cryosim.hpp"
#include "otomo/dataset_io.hpp"
#include "otomo/physics.hpp"

namespace httplib {
class Server;
}

namespace otomo::app {

// OTOMO_DATA_DIR, when set and non-empty, overrides `fallback`.
std::filesystem::path resolve_project_dir(const std::filesystem::path& fallback);

class ConflictError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

enum class JobStatus { Queued, Running, Done, Failed };
std::string_view to_string(JobStatus status);

struct JobInfo {
  std::string id;
  std::string kind;
  JobStatus status = JobStatus::Queued;
  double progress = 0.0;
  std::string result;  // output path, relative to the project
  std::string error;
  nlohmann::json params;
};

nlohmann::json to_json(const JobInfo& job);

class ProjectState {
 public:
  explicit ProjectState(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path images_dir() const { return root_ / "images"; }
  std::filesystem::path micrograph_dir() const { return root_ / "micrograph"; }
  std::filesystem::path volume_path(std::string_view which) const;

  std::string pattern() const;

  struct Versioned {
    nlohmann::json value;
    std::uint64_t version = 0;
  };

  Versioned align() const;
  Versioned preprocess() const;
  Versioned picks() const;

  // Validate, persist, bump the version. Throw ConflictError on a stale
  // expected version and ParseError / ShapeError on bad input.
  Versioned put_align(const nlohmann::json& body);
  Versioned put_preprocess(const nlohmann::json& body);
  Versioned put_picks(const nlohmann::json& body);
  Versioned add_pick(const nlohmann::json& body);
  Versioned clear_picks(std::optional<std::uint64_t> expected);
  Versioned delete_pick(std::size_t index, std::optional<std::uint64_t> expected);

  dataset::AlignSpec align_spec() const;
  physics::PreprocessConfig preprocess_config() const;
  std::vector<cryo::Pick> pick_list() const;

  // Pattern-matching files in images/, sorted by index.
  std::vector<dataset::ParsedName> list_images() const;
  std::vector<std::string> image_files() const;

  // Dims of micrograph/micrograph16.png, if present.
  std::optional<std::pair<std::size_t, std::size_t>> micrograph_dims() const;

  nlohmann::json summary() const;

 private:
  void load();
  void persist(const char* file, const nlohmann::json& j) const;
  void check_version(std::uint64_t current, std::optional<std::uint64_t> expected) const;

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  dataset::AlignSpec align_;
  std::uint64_t align_version_ = 0;
  physics::PreprocessConfig preprocess_;
  std::uint64_t preprocess_version_ = 0;
  std::vector<cryo::Pick> picks_;
  std::uint64_t picks_version_ = 0;
};

// FIFO queue with one worker thread: at most one job runs at a time.
class JobQueue {
 public:
  using Task = std::function<std::string(const std::function<void(double)>& progress)>;

  JobQueue();
  ~JobQueue();
  JobQueue(const JobQueue&) = delete;
  JobQueue& operator=(const JobQueue&) = delete;

  std::string submit(std::string kind, nlohmann::json params, Task task);
  std::optional<JobInfo> get(const std::string& id) const;
  std::vector<JobInfo> list() const;

  // Blocks until the job leaves the queued/running states. Test helper.
  JobInfo wait(const std::string& id) const;

 private:
  void run();

  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::map<std::string, JobInfo> jobs_;
  std::deque<std::pair<std::string, Task>> queue_;
  std::uint64_t next_id_ = 1;
  bool stopping_ = false;
  std::thread worker_;
};

struct ServiceConfig {
  std::filesystem::path project_dir;
  std::optional<std::filesystem::path> ui_dir;  // static bundle mounted at /
  std::size_t workers = 0;                      // reconstruction threads
};

class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws IoError on failure.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  // Runs listen() on a background thread.
  void start();
  void stop();

  ProjectState& project() { return project_; }
  JobQueue& jobs() { return jobs_; }

 private:
  void routes();

  ServiceConfig config_;
  ProjectState project_;
  JobQueue jobs_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace otomo::app
