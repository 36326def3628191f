#include <doctest.h>

#include <cmath>
#include <random>

#include "otomo/radon.hpp"
#include "otomo/recon.hpp"
#include "test_support.hpp"

using namespace otomo;
using namespace otomo::recon;

namespace {

radon::Phantom centered_disk(double r, double c = 1.0) {
  return radon::Phantom{{radon::Disk{{0.0, 0.0}, r, c}}};
}

double interior_mean(const Image& img, double radius) {
  const std::size_t n = img.width();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const Point2 p = pixel_to_slice({double(r), double(c)}, n, n);
      if (std::hypot(p.x, p.y) > radius) continue;
      sum += img.at(r, c);
      ++count;
    }
  }
  return sum / double(count);
}

Sinogram blob_sinogram(const std::vector<testing::Blob>& blobs, const ScanGeometry& g) {
  Sinogram s(g, angle_grid(g));
  for (std::size_t i = 0; i < g.n_detectors; ++i) {
    for (std::size_t j = 0; j < s.n_angles(); ++j) {
      s.at(i, j) = testing::blob_line_integral(blobs, {g.detector_offset(i), s.angles()[j]});
    }
  }
  return s;
}

ProjectionStack cylinder_stack(std::size_t height, std::size_t width, std::size_t count, double radius) {
  const ScanGeometry g = ScanGeometry::make(width, count);
  const Sinogram s = radon::phantom_sinogram(centered_disk(radius), g);
  ProjectionStack stack;
  stack.angles = angle_grid(g);
  for (std::size_t n = 0; n < count; ++n) {
    std::vector<double> v(height * width);
    for (std::size_t k = 0; k < height; ++k) {
      for (std::size_t j = 0; j < width; ++j) v[k * width + j] = s.at(j, n);
    }
    stack.images.push_back(Image::real(height, width, std::move(v)));
  }
  return stack;
}

}  // namespace

TEST_CASE("ramp filter") {
  SUBCASE("padded length") {
    CHECK(padded_length(1) == 64);
    CHECK(padded_length(32) == 64);
    CHECK(padded_length(33) == 128);
    CHECK(padded_length(971) == 2048);
  }
  SUBCASE("response is close to |k|/M and vanishes above the cutoff") {
    const std::size_t m = 256;
    const auto ramp = filter_response(m, {});
    REQUIRE(ramp.size() == m / 2 + 1);
    CHECK(ramp[0] > 0.0);
    for (std::size_t k = 1; k <= m / 2; ++k) {
      CHECK(ramp[k] == doctest::Approx(double(k) / m).epsilon(0.05));
    }
    const auto cut = filter_response(m, {FilterKind::Hann, 0.5});
    for (std::size_t k = m / 4 + 1; k <= m / 2; ++k) CHECK(cut[k] == 0.0);
    for (std::size_t k = 1; k < m / 4; ++k) CHECK(cut[k] < ramp[k]);
  }
  SUBCASE("filter names") {
    for (FilterKind k : {FilterKind::RamLak, FilterKind::SheppLogan, FilterKind::Hann, FilterKind::Hamming}) {
      CHECK(parse_filter_kind(to_string(k)) == k);
    }
    CHECK_THROWS_AS(parse_filter_kind("butterworth"), ParseError);
    CHECK_THROWS_AS((FilterSpec{FilterKind::RamLak, 0.0}).validate(), DomainError);
    CHECK_THROWS_AS((FilterSpec{FilterKind::RamLak, 1.5}).validate(), DomainError);
  }
}

TEST_CASE("fbp_slice basic contracts") {
  const ScanGeometry g = ScanGeometry::make(32, 20);
  SUBCASE("zero sinogram") {
    const Image out = fbp_slice(Sinogram(g, angle_grid(g)), {});
    CHECK(out.height() == 32);
    CHECK(out.width() == 32);
    for (double v : out.values()) CHECK(v == 0.0);
  }
  SUBCASE("fewer than two angles") {
    const ScanGeometry one = ScanGeometry::make(32, 1);
    CHECK_THROWS_AS(fbp_slice(Sinogram(one, angle_grid(one)), {}), ShapeError);
  }
  SUBCASE("NaN input") {
    Sinogram s(g, angle_grid(g));
    s.at(3, 4) = NAN;
    CHECK_THROWS_AS(fbp_slice(s, {}), DomainError);
  }
  SUBCASE("linearity") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    Sinogram a(g, angle_grid(g)), b(g, angle_grid(g)), c(g, angle_grid(g));
    for (std::size_t i = 0; i < a.values().size(); ++i) {
      a.values()[i] = nd(rng);
      b.values()[i] = nd(rng);
      c.values()[i] = 2.5 * a.values()[i] - 0.75 * b.values()[i];
    }
    const Image fa = fbp_slice(a, {}), fb = fbp_slice(b, {}), fc = fbp_slice(c, {});
    std::vector<double> expect(fa.size());
    for (std::size_t i = 0; i < expect.size(); ++i) expect[i] = 2.5 * fa.values()[i] - 0.75 * fb.values()[i];
    CHECK(testing::rmse(fc.values(), expect) <= 1e-9 * testing::rms(expect));
  }
  SUBCASE("outside the inscribed circle is zero") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Sinogram s(g, angle_grid(g));
    for (double& v : s.values()) v = u(rng);
    const Image out = fbp_slice(s, {});
    for (std::size_t r = 0; r < 32; ++r) {
      for (std::size_t c = 0; c < 32; ++c) {
        const Point2 p = pixel_to_slice({double(r), double(c)}, 32, 32);
        if (std::hypot(p.x, p.y) > 16.0) CHECK(out.at(r, c) == 0.0);
      }
    }
  }
}

TEST_CASE("prepare_projections") {
  SUBCASE("uniform 360 grid folds onto 180 with equal weights") {
    const ScanGeometry g = ScanGeometry::make(8, 12);
    const auto prep = prepare_projections(Sinogram(g, angle_grid(g)), AngleHandling::AverageAntipodes);
    REQUIRE(prep.angles.size() == 6);
    for (double w : prep.weights) CHECK(w == doctest::Approx(kPi / 6));
  }
  SUBCASE("raw handling keeps every angle") {
    const ScanGeometry g = ScanGeometry::make(8, 12);
    const auto prep = prepare_projections(Sinogram(g, angle_grid(g)), AngleHandling::Raw);
    REQUIRE(prep.angles.size() == 12);
    double total = 0.0;
    for (double w : prep.weights) total += w;
    CHECK(total == doctest::Approx(kPi));
  }
  SUBCASE("antipodal average mirrors t") {
    const ScanGeometry g = ScanGeometry::make(3, 2);
    Sinogram s(g, {0.0, kPi});
    s.at(0, 0) = 1.0;
    s.at(2, 1) = 3.0;
    const auto prep = prepare_projections(s, AngleHandling::AverageAntipodes);
    REQUIRE(prep.projections.size() == 1);
    CHECK(prep.projections[0][0] == 2.0);
    CHECK(prep.projections[0][2] == 0.0);
  }
  SUBCASE("non-uniform weights sum to pi") {
    const ScanGeometry g = ScanGeometry::make(4, 5);
    const auto prep = prepare_projections(
        Sinogram(g, {0.1, 0.3, 1.4, 2.0, deg_to_rad(300.0)}), AngleHandling::AverageAntipodes);
    double total = 0.0;
    for (double w : prep.weights) {
      CHECK(w > 0.0);
      total += w;
    }
    CHECK(total == doctest::Approx(kPi));
    for (std::size_t i = 1; i < prep.angles.size(); ++i) CHECK(prep.angles[i] >= prep.angles[i - 1]);
  }
}

TEST_CASE("FBP reproduces the analytic disk") {
  const std::size_t n = 256;
  const auto ph = centered_disk(64.0);
  const Image truth = radon::rasterize(ph, n);
  const ScanGeometry g = ScanGeometry::make(n, 400);
  const Sinogram s = radon::phantom_sinogram(ph, g);
  for (AngleHandling h : {AngleHandling::AverageAntipodes, AngleHandling::Raw}) {
    FbpOptions opt;
    opt.angle_handling = h;
    const Image out = fbp_slice(s, opt);
    CHECK(testing::relative_error_in_circle(out, truth) <= 0.05);
    CHECK(interior_mean(out, 62.0) == doctest::Approx(1.0).epsilon(0.03));
  }
}

TEST_CASE("FBP of Radon is close to identity on smooth phantoms") {
  const std::size_t n = 256;
  std::mt19937_64 rng(41);
  const ScanGeometry g = ScanGeometry::make(n, 400);
  for (int trial = 0; trial < 2; ++trial) {
    const auto blobs = testing::random_blobs(rng, 6, 0.5 * n);
    const Image truth = testing::blob_image(blobs, n);
    CHECK(testing::relative_error_in_circle(fbp_slice(blob_sinogram(blobs, g), {}), truth) <= 0.03);
    CHECK(testing::relative_error_in_circle(fbp_slice(radon::radon_forward(truth, g), {}), truth) <= 0.03);
  }
}

TEST_CASE("smoothing windows stay accurate on smooth phantoms") {
  const std::size_t n = 128;
  std::mt19937_64 rng(43);
  const auto blobs = testing::random_blobs(rng, 5, 0.5 * n, 3.0, 8.0);
  const Sinogram s = blob_sinogram(blobs, ScanGeometry::make(n, 200));
  const Image truth = testing::blob_image(blobs, n);
  for (FilterKind k : {FilterKind::SheppLogan, FilterKind::Hann, FilterKind::Hamming}) {
    FbpOptions opt;
    opt.filter.kind = k;
    CHECK(testing::relative_error_in_circle(fbp_slice(s, opt), truth) <= 0.05);
  }
}

TEST_CASE("rotation equivariance") {
  const std::size_t n = 128, n_ang = 360;
  std::mt19937_64 rng(47);
  auto blobs = testing::random_blobs(rng, 5, 0.5 * n);
  const ScanGeometry g = ScanGeometry::make(n, n_ang);
  const std::size_t shift = 90;  // 90 degrees, so the pixel grid maps onto itself
  const double delta = 2 * kPi * double(shift) / double(n_ang);

  auto rotated = blobs;
  for (auto& b : rotated) {
    const Point2 p = b.center;
    b.center = {std::cos(delta) * p.x - std::sin(delta) * p.y, std::sin(delta) * p.x + std::cos(delta) * p.y};
  }
  const Sinogram s0 = blob_sinogram(blobs, g);
  const Sinogram s1 = blob_sinogram(rotated, g);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n_ang; ++j) {
      CHECK(s1.at(i, (j + shift) % n_ang) == doctest::Approx(s0.at(i, j)).epsilon(1e-9));
    }
  }

  const Image f0 = fbp_slice(s0, {});
  const Image f1 = fbp_slice(s1, {});
  // A +90 degree rotation sends pixel (r, c) to (n-1-c, r).
  std::vector<double> back(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) back[r * n + c] = f1.at(n - 1 - c, r);
  }
  CHECK(testing::relative_rmse(back, f0.values()) <= 0.02);
}

TEST_CASE("fewer angles give a larger error") {
  const std::size_t n = 128;
  const auto ph = centered_disk(32.0);
  const Image truth = radon::rasterize(ph, n);
  auto error = [&](std::size_t n_ang) {
    const ScanGeometry g = ScanGeometry::make(n, n_ang);
    return testing::relative_error_in_circle(fbp_slice(radon::phantom_sinogram(ph, g), {}), truth);
  };
  const double e80 = error(80), e400 = error(400);
  CHECK(std::isfinite(e80));
  CHECK(e80 > e400);
}

TEST_CASE("nearest interpolation is close to linear") {
  const std::size_t n = 128;
  const auto ph = centered_disk(32.0);
  const Sinogram s = radon::phantom_sinogram(ph, ScanGeometry::make(n, 200));
  FbpOptions opt;
  opt.interpolation = Interpolation::Nearest;
  CHECK(testing::relative_error_in_circle(fbp_slice(s, opt), radon::rasterize(ph, n)) <= 0.1);
  CHECK(parse_interpolation("nearest") == Interpolation::Nearest);
  CHECK(to_string(parse_interpolation("linear")) == "linear");
  CHECK_THROWS_AS(parse_interpolation("cubic"), ParseError);
}

TEST_CASE("stack_to_sinograms") {
  SUBCASE("element identity") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ProjectionStack stack;
    for (std::size_t n = 0; n < 7; ++n) {
      std::vector<double> v(5 * 6);
      for (double& x : v) x = u(rng);
      stack.images.push_back(Image::real(5, 6, v));
      stack.angles.push_back(2 * kPi * double(n) / 7);
    }
    const SinogramStack sinos = stack_to_sinograms(stack);
    CHECK(sinos.size() == 5);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = rng() % 7, k = rng() % 5, j = rng() % 6;
      CHECK(sinos.at(k, j, n) == stack.images[n].at(k, j));
      CHECK(sinos[k].at(j, n) == stack.images[n].at(k, j));
    }
  }
  SUBCASE("single pixel") {
    ProjectionStack stack{{Image::real(1, 1, 0.25)}, {0.0}, {}};
    const Sinogram s = stack_to_sinograms(stack)[0];
    CHECK(s.n_detectors() == 1);
    CHECK(s.n_angles() == 1);
    CHECK(s.at(0, 0) == 0.25);
  }
  SUBCASE("heterogeneous images") {
    ProjectionStack stack{{Image::real(2, 2), Image::real(2, 3)}, {0.0, 1.0}, {}};
    CHECK_THROWS_AS(stack_to_sinograms(stack), ShapeError);
  }
}

TEST_CASE("reconstruct_volume") {
  SUBCASE("identical images give identical slices") {
    ProjectionStack stack = cylinder_stack(4, 32, 40, 8.0);
    const Volume vol = reconstruct_volume(ReconJob::for_stack(stack), stack);
    CHECK(vol.depth() == 4);
    CHECK(vol.rows() == 32);
    CHECK(vol.cols() == 32);
    for (std::size_t k = 1; k < 4; ++k) CHECK(vol.slice(k) == vol.slice(0));
  }
  SUBCASE("cylinder phantom passes the disk criterion in every slice") {
    const std::size_t n = 128;
    ProjectionStack stack = cylinder_stack(3, n, 400, 32.0);
    const Volume vol = reconstruct_volume(ReconJob::for_stack(stack), stack);
    const Image truth = radon::rasterize(centered_disk(32.0), n);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(testing::relative_error_in_circle(vol.slice(k), truth) <= 0.05);
      CHECK(interior_mean(vol.slice(k), 30.0) == doctest::Approx(1.0).epsilon(0.03));
    }

    SUBCASE("z integral is the disk profile scaled by the height") {
      const Image z = project_volume(vol, Axis::Z, RenderMode::Integral);
      CHECK(z.height() == n);
      CHECK(z.width() == n);
      CHECK(interior_mean(z, 30.0) == doctest::Approx(3.0).epsilon(0.01));
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) CHECK(z.at(r, c) == doctest::Approx(3.0 * vol.at(0, r, c)).epsilon(1e-6));
      }
    }
  }
  SUBCASE("deterministic across worker counts") {
    ProjectionStack stack = cylinder_stack(6, 48, 60, 12.0);
    ReconJob job = ReconJob::for_stack(stack);
    job.workers = 1;
    const Volume a = reconstruct_volume(job, stack);
    job.workers = 4;
    const Volume b = reconstruct_volume(job, stack);
    CHECK(a == b);
  }
  SUBCASE("raw stack rejected") {
    ProjectionStack stack{{Image::raw(2, 4), Image::raw(2, 4)}, {0.0, 1.0}, {}};
    CHECK_THROWS_AS(reconstruct_volume(ReconJob::for_stack(stack), stack), DomainError);
  }
  SUBCASE("slice errors carry the index") {
    ReconJob job;
    job.height = 3;
    job.width = 8;
    job.count = 4;
    job.angles_deg = {0, 90, 180, 270};
    try {
      reconstruct_slices(
          job,
          [](std::size_t k) {
            const ScanGeometry g = ScanGeometry::make(8, 4);
            Sinogram s(g, angle_grid(g));
            if (k == 2) s.at(0, 0) = NAN;
            return s;
          },
          [](std::size_t, const Image&) {});
      FAIL("expected SliceError");
    } catch (const SliceError& e) {
      CHECK(e.slice() == 2);
    }
  }
  SUBCASE("angle validation") {
    ProjectionStack stack = cylinder_stack(1, 16, 4, 4.0);
    ReconJob job = ReconJob::for_stack(stack);
    job.angles_deg[1] = 360.0;
    CHECK_THROWS_AS(job.validate(), DomainError);
    job.angles_deg.pop_back();
    CHECK_THROWS_AS(job.validate(), ShapeError);
  }
  SUBCASE("progress reaches the slice count") {
    ProjectionStack stack = cylinder_stack(5, 16, 8, 4.0);
    std::size_t last = 0, total = 0;
    reconstruct_volume(ReconJob::for_stack(stack), stack, [&](std::size_t done, std::size_t t) {
      last = std::max(last, done);
      total = t;
    });
    CHECK(last == 5);
    CHECK(total == 5);
  }
}

TEST_CASE("for_stack wraps angles that round up to 360") {
  ProjectionStack stack{{Image::real(1, 4), Image::real(1, 4)}, {0.0, std::nextafter(2 * kPi, 0.0)}, {}};
  const ReconJob job = ReconJob::for_stack(stack);
  CHECK_NOTHROW(job.validate());
}

TEST_CASE("renders") {
  SUBCASE("all-zero volume") {
    const Image img = render_projection(Volume(3, 4, 4), Axis::Z, RenderMode::Integral);
    for (auto v : img.raw_pixels()) CHECK(v == 0);
  }
  SUBCASE("single voxel, max mode") {
    Volume vol(3, 4, 5);
    vol.at(1, 2, 3) = 0.7f;
    const Image z = render_projection(vol, Axis::Z, RenderMode::Max);
    CHECK(z.height() == 4);
    CHECK(z.width() == 5);
    const Image y = render_projection(vol, Axis::Y, RenderMode::Max);
    CHECK(y.height() == 3);
    CHECK(y.width() == 5);
    const Image x = render_projection(vol, Axis::X, RenderMode::Max);
    CHECK(x.height() == 3);
    CHECK(x.width() == 4);
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 5; ++c) CHECK(z.raw_at(r, c) == ((r == 2 && c == 3) ? 255 : 0));
    }
    CHECK(y.raw_at(1, 3) == 255);
    CHECK(x.raw_at(1, 2) == 255);
  }
  SUBCASE("negatives are clamped") {
    const Image n8 = normalize_to_8bit(Image::real(1, 3, std::vector<double>{-5.0, 0.0, 2.0}));
    CHECK(n8.raw_at(0, 0) == 0);
    CHECK(n8.raw_at(0, 1) == 0);
    CHECK(n8.raw_at(0, 2) == 255);
  }
  SUBCASE("names") {
    CHECK(parse_axis("y") == Axis::Y);
    CHECK(parse_render_mode("max") == RenderMode::Max);
    CHECK_THROWS_AS(parse_axis("w"), ParseError);
    CHECK_THROWS_AS(parse_render_mode("mip"), ParseError);
  }
}
