#include "otomo/cli.hpp"

#include <cstdlib>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "otomo/image_io.hpp"
#include "otomo/pipeline.hpp"
#include "otomo/raw_io.hpp"
#include "otomo/service.hpp"

namespace otomo::app {
namespace fs = std::filesystem;

namespace {

constexpr int kUsageExit = 2;

// Flags are recorded verbatim, numbers as numbers, so a run can be repeated
// from its output metadata.
nlohmann::json echo_options(const CLI::App& cmd) {
  auto value = [](const std::string& s) -> nlohmann::json {
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (!s.empty() && end == s.c_str() + s.size()) return d;
    return s;
  };
  nlohmann::json j = nlohmann::json::object();
  for (const CLI::Option* opt : cmd.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help") continue;
    if (opt->get_expected_max() == 0) {
      j[name] = opt->count() > 0;
      continue;
    }
    std::vector<std::string> values = opt->results();
    if (values.empty()) {
      if (opt->get_default_str().empty()) continue;
      values = {opt->get_default_str()};
    }
    if (values.size() == 1 && opt->get_expected_max() <= 1) {
      j[name] = value(values.front());
    } else {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& v : values) arr.push_back(value(v));
      j[name] = arr;
    }
  }
  return {{"command", cmd.get_name()}, {"options", j}};
}

struct PreprocessFlags {
  double gamma = 2.2;
  double i_max = 1.0;
  int v_floor = 1;
  std::string mode = "linear";
  bool no_scale = false;
  std::string floor_policy = "clamp";

  void add(CLI::App* cmd) {
    cmd->add_option("--gamma", gamma, "Camera gamma");
    cmd->add_option("--i-max", i_max, "Intensity mapped to pixel value 255");
    cmd->add_option("--v-floor", v_floor, "Smallest pixel value for the exact conversion");
    cmd->add_option("--mode", mode, "Pixel conversion: exact or linear")->check(CLI::IsMember({"exact", "linear"}));
    cmd->add_flag("--no-scale", no_scale, "Linear mode: plain complement 255 - V");
    cmd->add_option("--floor-policy", floor_policy, "Dark pixels in exact mode: error or clamp")
        ->check(CLI::IsMember({"error", "clamp"}));
  }

  physics::PreprocessConfig config() const {
    physics::PreprocessConfig cfg;
    cfg.camera.gamma = gamma;
    cfg.camera.i_max = i_max;
    cfg.camera.v_floor = v_floor;
    cfg.mode = physics::parse_preprocess_mode(mode);
    cfg.keep_scale = !no_scale;
    cfg.floor_policy = physics::parse_floor_policy(floor_policy);
    cfg.camera.validate();
    return cfg;
  }
};

struct FbpFlags {
  std::string filter = "ram-lak";
  double cutoff = 1.0;
  std::string interpolation = "linear";
  std::string angle_handling = "average";

  void add(CLI::App* cmd, bool full = true) {
    cmd->add_option("--filter", filter, "ram-lak, shepp-logan, hann or hamming")
        ->check(CLI::IsMember({"ram-lak", "shepp-logan", "hann", "hamming"}));
    cmd->add_option("--cutoff", cutoff, "Filter cutoff as a fraction of Nyquist");
    if (!full) return;
    cmd->add_option("--interpolation", interpolation, "Back-projection sampling: nearest or linear")
        ->check(CLI::IsMember({"nearest", "linear"}));
    cmd->add_option("--angle-handling", angle_handling, "Antipodal projections: average or raw")
        ->check(CLI::IsMember({"average", "raw"}));
  }

  recon::FbpOptions options() const {
    return fbp_from_json({{"filter", filter},
                          {"cutoff", cutoff},
                          {"interpolation", interpolation},
                          {"angle_handling", angle_handling}});
  }
};

struct StackFlags {
  std::string input;
  std::string stack;
  std::string pattern{dataset::kDefaultPattern};
  std::string align;
  double angles_span = 360.0;

  void add(CLI::App* cmd) {
    auto* in = cmd->add_option("--input", input, "Directory of recorded PNGs")->check(CLI::ExistingDirectory);
    auto* st = cmd->add_option("--stack", stack, "Preprocessed stack (.raw or its .json sidecar)")
                   ->check(CLI::ExistingFile);
    in->excludes(st);
    cmd->add_option("--pattern", pattern, "File name pattern of the recordings");
    cmd->add_option("--align", align, "AlignSpec JSON applied to every recording")->check(CLI::ExistingFile);
    cmd->add_option("--angles-span", angles_span, "Angular range covered by the file names: 180 or 360");
  }

  // Raw 8-bit images for --input, line integrals for --stack.
  ProjectionStack load(std::ostream& err) const {
    if (input.empty() && stack.empty()) throw ParseError("one of --input or --stack is required");
    if (!stack.empty()) {
      if (!align.empty()) throw ParseError("--align applies to --input only");
      return io::read_stack(stack);
    }
    const dataset::AlignSpec spec = align.empty() ? dataset::AlignSpec{} : dataset::align_from_json(read_json(align));
    dataset::LoadReport report;
    ProjectionStack s = dataset::load_stack(input, pattern, spec, &report);
    apply_angle_span(s, parse_angle_span(angles_span));
    fmt::print(err, "loaded {} images ({}x{}) from {}", s.count(), s.height(), s.width(), input);
    if (report.skipped) fmt::print(err, ", skipped {} non-matching files", report.skipped);
    if (report.color_converted) fmt::print(err, ", {} converted from color", report.color_converted);
    fmt::print(err, "\n");
    return s;
  }
};

// Line integrals for every image; raw images go through the camera model.
ProjectionStack to_line_integrals(ProjectionStack stack, const physics::PreprocessConfig& cfg, std::ostream& err) {
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < stack.count(); ++i) {
    if (!stack.images[i].is_raw()) continue;
    physics::PreprocessReport report;
    try {
      stack.images[i] = physics::preprocess_image(stack.images[i], cfg, &report);
    } catch (const SaturationError& e) {
      const std::string where = i < stack.sources.size() ? stack.sources[i] : fmt::format("image {}", i);
      throw DomainError(fmt::format("{}: {}", where, e.what()));
    }
    clamped += report.clamped_pixels;
  }
  if (clamped) fmt::print(err, "clamped {} pixels below v_floor={}\n", clamped, cfg.camera.v_floor);
  return stack;
}

Image display_slice(const Image& img) { return recon::normalize_to_8bit(img); }

void log_progress(std::ostream& err, double f, int& last_decile) {
  const int decile = static_cast<int>(f * 10.0);
  if (decile > last_decile) {
    last_decile = decile;
    fmt::print(err, "progress {:3d}%\n", decile * 10);
  }
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optical tomography and cryo-EM simulation toolkit", "otomo"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough(false);

  // fetch
  auto* fetch = app.add_subcommand("fetch", "Download a dataset and verify its checksums");
  std::string descriptor, dest = ".";
  dataset::FetchOptions fetch_opts;
  fetch->add_option("--descriptor", descriptor, "Dataset descriptor JSON")->required()->check(CLI::ExistingFile);
  fetch->add_option("--dest", dest, "Destination directory");
  fetch->add_option("--retries", fetch_opts.retries, "Attempts per file");
  fetch->add_option("--parallel", fetch_opts.parallelism, "Concurrent downloads");
  fetch->add_option("--timeout", fetch_opts.timeout_seconds, "Per-request timeout in seconds");

  // preprocess
  auto* preprocess = app.add_subcommand("preprocess", "Align, crop and convert recordings to line integrals");
  StackFlags pre_stack;
  PreprocessFlags pre_flags;
  std::string pre_output, pre_png;
  pre_stack.add(preprocess);
  pre_flags.add(preprocess);
  preprocess->add_option("--output", pre_output, "Output stack (.raw plus .json sidecar)")->required();
  preprocess->add_option("--png-dir", pre_png, "Also write each aligned recording as PNG");

  // sinogram
  auto* sinogram = app.add_subcommand("sinogram", "Export the sinograms of selected detector rows");
  StackFlags sino_stack;
  PreprocessFlags sino_flags;
  std::vector<std::size_t> sino_rows;
  std::string sino_output;
  sino_stack.add(sinogram);
  sino_flags.add(sinogram);
  sinogram->add_option("--row", sino_rows, "Detector row (repeatable; default: the middle row)");
  sinogram->add_option("--output", sino_output, "Output directory")->required();

  // reconstruct
  auto* reconstruct = app.add_subcommand("reconstruct", "Filtered back-projection of a whole stack");
  StackFlags rec_stack;
  PreprocessFlags rec_pre;
  FbpFlags rec_fbp;
  ReconstructRequest rec_req;
  std::string rec_output;
  rec_stack.add(reconstruct);
  rec_pre.add(reconstruct);
  rec_fbp.add(reconstruct);
  reconstruct->add_option("--pitch", rec_req.detector_pitch, "Detector pitch in pixels");
  reconstruct->add_option("--workers", rec_req.workers, "Reconstruction threads (0: all cores)");
  reconstruct->add_option("--output", rec_output, "Output volume (.raw plus .json sidecar)")->required();

  // render
  auto* render = app.add_subcommand("render", "Render a volume projection or slice as PNG");
  std::string render_volume, render_output, render_axis = "z", render_mode = "integral";
  std::optional<std::size_t> render_slice;
  render->add_option("--volume", render_volume, "Volume (.raw or sidecar)")->required()->check(CLI::ExistingFile);
  render->add_option("--axis", render_axis, "Projection axis: x, y or z")->check(CLI::IsMember({"x", "y", "z"}));
  render->add_option("--projection", render_mode, "integral or max")->check(CLI::IsMember({"integral", "max"}));
  render->add_option("--slice", render_slice, "Render depth slice k instead of a projection");
  render->add_option("--output", render_output, "Output PNG")->required();

  // simulate-micrograph
  auto* simulate = app.add_subcommand("simulate-micrograph", "Scatter projections over a synthetic micrograph");
  SimulateRequest sim_req;
  std::string sim_output, sim_overlap = "allow", sim_patches;
  bool sim_no_noise = false;
  simulate->add_option("--count", sim_req.config.count, "Number of placements");
  simulate->add_option("--snr", sim_req.config.snr, "Signal-to-noise variance ratio");
  simulate->add_option("--seed", sim_req.config.seed, "Seed for placements and noise");
  simulate->add_option("--height", sim_req.config.height, "Canvas height");
  simulate->add_option("--width", sim_req.config.width, "Canvas width");
  simulate->add_option("--overlap", sim_overlap, "allow or reject")->check(CLI::IsMember({"allow", "reject"}));
  simulate->add_flag("--no-noise", sim_no_noise, "Write the noise-free micrograph only");
  simulate->add_option("--patches", sim_patches, "Preprocessed stack used as patches")->check(CLI::ExistingFile);
  simulate->add_option("--patch-count", sim_req.patch_count, "Synthetic patches (without --patches)");
  simulate->add_option("--patch-height", sim_req.patch_height, "Synthetic patch height");
  simulate->add_option("--patch-width", sim_req.patch_width, "Synthetic patch width");
  simulate->add_option("--output", sim_output, "Output directory")->required();

  // add-noise
  auto* noise = app.add_subcommand("add-noise", "Add Gaussian noise at a given SNR");
  std::string noise_input, noise_output, noise_display;
  double noise_snr = 0.75;
  std::uint64_t noise_seed = 0;
  noise->add_option("--input", noise_input, "16-bit absorbance PNG")->required()->check(CLI::ExistingFile);
  noise->add_option("--snr", noise_snr, "Signal-to-noise variance ratio");
  noise->add_option("--seed", noise_seed, "Noise seed");
  noise->add_option("--output", noise_output, "Output 16-bit PNG")->required();
  noise->add_option("--display", noise_display, "Also write an inverted 8-bit PNG");

  // extract
  auto* extract = app.add_subcommand("extract", "Cut picked boxes out of a micrograph");
  std::string ex_micrograph, ex_picks, ex_output;
  std::size_t ex_stride = 1;
  double ex_span = 360.0;
  extract->add_option("--micrograph", ex_micrograph, "16-bit absorbance PNG")->required()->check(CLI::ExistingFile);
  extract->add_option("--picks", ex_picks, "Picks JSON")->required()->check(CLI::ExistingFile);
  extract->add_option("--stride", ex_stride, "Keep every n-th pick");
  extract->add_option("--angles-span", ex_span, "Angular range of the pick labels: 180 or 360");
  extract->add_option("--output", ex_output, "Output directory")->required();

  // subset-reconstruct
  auto* subset = app.add_subcommand("subset-reconstruct", "Known-angle reconstruction from picks");
  std::string sub_micrograph, sub_picks, sub_output;
  std::size_t sub_stride = 1;
  double sub_span = 360.0;
  FbpFlags sub_fbp;
  subset->add_option("--micrograph", sub_micrograph, "16-bit absorbance PNG")->required()->check(CLI::ExistingFile);
  subset->add_option("--picks", sub_picks, "Picks JSON with angle labels")->required()->check(CLI::ExistingFile);
  subset->add_option("--stride", sub_stride, "Keep every n-th pick");
  subset->add_option("--angles-span", sub_span, "Angular range of the pick labels: 180 or 360");
  sub_fbp.add(subset, false);
  subset->add_option("--output", sub_output, "Output volume (.raw plus .json sidecar)")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service for the browser UI");
  std::string serve_project = ".", serve_host = "127.0.0.1", serve_ui;
  int serve_port = 8080;
  std::size_t serve_workers = 0;
  serve->add_option("--project", serve_project, "Project directory (OTOMO_DATA_DIR overrides)");
  serve->add_option("--host", serve_host, "Bind address");
  serve->add_option("--port", serve_port, "Port (0: any free port)");
  serve->add_option("--ui", serve_ui, "Static UI bundle served at /")->check(CLI::ExistingDirectory);
  serve->add_option("--workers", serve_workers, "Reconstruction threads (0: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    if (argc > 1 && argv[1][0] != '-' && app.get_subcommands().empty()) {
      fmt::print(err, "unknown subcommand '{}'\n", argv[1]);
    } else {
      app.exit(e, err, err);
    }
    CLI::App* failed = &app;
    for (CLI::App* sub : app.get_subcommands()) failed = sub;
    err << failed->help();
    return kUsageExit;
  }

  try {
    if (fetch->parsed()) {
      const auto desc = dataset::descriptor_from_json(read_json(descriptor));
      const auto result = dataset::fetch_dataset(desc, dest, fetch_opts);
      fmt::print(out, "{}: {} files ({} downloaded, {} already present) in {}\n", desc.name, result.paths.size(),
                 result.downloaded, result.skipped, (fs::path(dest) / desc.name).string());
    } else if (preprocess->parsed()) {
      ProjectionStack stack = pre_stack.load(err);
      if (!pre_png.empty()) {
        fs::create_directories(pre_png);
        for (std::size_t i = 0; i < stack.count(); ++i) {
          const std::string name = i < stack.sources.size() ? stack.sources[i] : fmt::format("image_{}.png", i);
          io::write_png_gray8(fs::path(pre_png) / name,
                              stack.images[i].is_raw() ? stack.images[i] : display_slice(stack.images[i]));
        }
      }
      const auto cfg = pre_flags.config();
      stack = to_line_integrals(std::move(stack), cfg, err);
      nlohmann::json prov = echo_options(*preprocess);
      prov["preprocess"] = to_json(cfg);
      io::write_stack(pre_output, stack, prov);
      fmt::print(out, "wrote {} ({} images, {}x{})\n", pre_output, stack.count(), stack.height(), stack.width());
    } else if (sinogram->parsed()) {
      const ProjectionStack stack = to_line_integrals(sino_stack.load(err), sino_flags.config(), err);
      const auto sinos = recon::stack_to_sinograms(stack);
      if (sino_rows.empty()) sino_rows.push_back(stack.height() / 2);
      fs::create_directories(sino_output);
      const nlohmann::json prov = echo_options(*sinogram);
      for (std::size_t k : sino_rows) {
        if (k >= sinos.size()) throw ShapeError(fmt::format("row {} out of range ({} rows)", k, sinos.size()));
        const Sinogram s = sinos[k];
        const fs::path base = fs::path(sino_output) / fmt::format("sinogram_{}", k);
        io::write_sinogram(base.string() + ".raw", s, prov);
        const std::vector<double> v(s.values().begin(), s.values().end());
        io::write_png_gray8(base.string() + ".png",
                            display_slice(Image::real(s.n_detectors(), s.n_angles(), v)));
        fmt::print(out, "wrote {}.raw ({} detectors x {} angles)\n", base.string(), s.n_detectors(), s.n_angles());
      }
    } else if (reconstruct->parsed()) {
      const ProjectionStack stack = rec_stack.load(err);
      rec_req.preprocess = rec_pre.config();
      rec_req.fbp = rec_fbp.options();
      rec_req.output = rec_output;
      rec_req.provenance = echo_options(*reconstruct);
      int last = -1;
      const auto summary =
          reconstruct_to_file(stack, rec_req, [&](double f) { log_progress(err, f, last); });
      if (summary.clamped_pixels) {
        fmt::print(err, "clamped {} pixels below v_floor={}\n", summary.clamped_pixels, rec_req.preprocess.camera.v_floor);
      }
      fmt::print(out, "wrote {} ({}x{}x{})\n", rec_output, summary.depth, summary.rows, summary.cols);
    } else if (render->parsed()) {
      Image img;
      if (render_slice) {
        img = display_slice(io::read_volume_slice(render_volume, *render_slice));
      } else {
        img = recon::render_projection(io::read_volume(render_volume), recon::parse_axis(render_axis),
                                       recon::parse_render_mode(render_mode));
      }
      io::write_png_gray8(render_output, img);
      fmt::print(out, "wrote {} ({}x{})\n", render_output, img.height(), img.width());
    } else if (simulate->parsed()) {
      sim_req.config.overlap = cryo::parse_overlap_policy(sim_overlap);
      sim_req.noise = !sim_no_noise;
      if (!sim_patches.empty()) sim_req.patch_stack = fs::path(sim_patches);
      sim_req.output_dir = sim_output;
      sim_req.provenance = echo_options(*simulate);
      const auto summary = simulate_to_directory(sim_req);
      fmt::print(out, "wrote {} ({} placements on {}x{}", sim_output, summary.manifest.placements.size(),
                 summary.manifest.height, summary.manifest.width);
      if (sim_req.noise) fmt::print(out, ", measured snr {:.4f}", summary.measured_snr);
      fmt::print(out, ")\n");
    } else if (noise->parsed()) {
      const Image clean = io::read_png_scaled16(noise_input);
      const Image noisy = cryo::add_noise(clean, noise_snr, noise_seed);
      io::write_png_scaled16(noise_output, noisy);
      if (!noise_display.empty()) io::write_png_gray8(noise_display, display_image(noisy));
      std::vector<double> diff(clean.size());
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = noisy.values()[i] - clean.values()[i];
      const double snr = cryo::variance(clean) / cryo::variance(Image::real(clean.height(), clean.width(), diff));
      fmt::print(out, "wrote {} (measured snr {:.4f})\n", noise_output, snr);
    } else if (extract->parsed()) {
      const Image micrograph = io::read_png_scaled16(ex_micrograph);
      const auto picks = every_nth(read_picks(ex_picks), ex_stride);
      const auto images = cryo::extract_picks(micrograph, picks);
      const bool labelled = std::all_of(picks.begin(), picks.end(), [](const cryo::Pick& p) { return !p.label.empty(); });
      ProjectionStack stack;
      const std::vector<double> angles = labelled ? angles_from_labels(picks, parse_angle_span(ex_span))
                                                  : std::vector<double>(picks.size(), 0.0);
      fs::create_directories(ex_output);
      for (std::size_t i = 0; i < images.size(); ++i) {
        const std::string name = picks[i].label.empty() ? fmt::format("pick_{}", i) : picks[i].label;
        io::write_png_gray8(fs::path(ex_output) / (name + ".png"), display_image(images[i]));
        stack.images.push_back(images[i]);
        stack.angles.push_back(deg_to_rad(angles[i]));
        stack.sources.push_back(name);
      }
      const bool uniform = std::all_of(images.begin(), images.end(), [&](const Image& im) {
        return im.height() == images.front().height() && im.width() == images.front().width();
      });
      if (!images.empty() && uniform) io::write_stack(fs::path(ex_output) / "picks.raw", stack, echo_options(*extract));
      fmt::print(out, "extracted {} picks into {}\n", images.size(), ex_output);
    } else if (subset->parsed()) {
      SubsetRequest req;
      req.micrograph = sub_micrograph;
      req.picks = every_nth(read_picks(sub_picks), sub_stride);
      req.span = parse_angle_span(sub_span);
      req.filter = sub_fbp.options().filter;
      req.output = sub_output;
      req.provenance = echo_options(*subset);
      int last = -1;
      const Volume vol = subset_to_file(req, [&](double f) { log_progress(err, f, last); });
      fmt::print(out, "wrote {} ({}x{}x{} from {} picks)\n", sub_output, vol.depth(), vol.rows(), vol.cols(),
                 req.picks.size());
    } else if (serve->parsed()) {
      ServiceConfig cfg;
      cfg.project_dir = resolve_project_dir(serve_project);
      if (!serve_ui.empty()) cfg.ui_dir = fs::path(serve_ui);
      cfg.workers = serve_workers;
      Service service(cfg);
      const int port = service.bind(serve_host, serve_port);
      fmt::print(out, "serving {} on http://{}:{}\n", cfg.project_dir.string(), serve_host, port);
      out.flush();
      service.listen();
    }
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace otomo::app
