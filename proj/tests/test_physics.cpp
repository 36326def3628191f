#include <doctest.h>

#include <cmath>
#include <random>

#include "otomo/physics.hpp"

using namespace otomo;
using namespace otomo::physics;

TEST_CASE("attenuate") {
  CHECK(attenuate(100.0, 0.0) == 100.0);
  CHECK(attenuate(100.0, std::log(2.0)) == doctest::Approx(50.0).epsilon(1e-14));
  // 1 mm path through mu = 1 / mm
  CHECK(attenuate(1.0, 1.0) == doctest::Approx(0.36787944117144233).epsilon(1e-15));
  CHECK_THROWS_AS(attenuate(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(attenuate(-1.0, 1.0), DomainError);
  CHECK_THROWS_AS(attenuate(1.0, -0.5), DomainError);
}

TEST_CASE("intensity_to_pixel") {
  CameraModel cam;
  cam.i_max = 3.0;
  CHECK(intensity_to_pixel(3.0, cam) == 255);
  CHECK(intensity_to_pixel(0.0, cam) == 0);
  cam.gamma = 2.0;
  CHECK(intensity_to_pixel(1.5, cam) == 180);
  CHECK(intensity_to_pixel_value(1.5, cam) == doctest::Approx(180.31222920256962).epsilon(1e-14));
  CHECK_THROWS_AS(intensity_to_pixel(3.0001, cam), DomainError);
}

TEST_CASE("pixel_to_radon_exact") {
  const CameraModel cam;
  CHECK(pixel_to_radon_exact(255, cam) == 0.0);
  CHECK(pixel_to_radon_exact(127, cam) == doctest::Approx(1.5335682091396367).epsilon(1e-14));
  CHECK_THROWS_AS(pixel_to_radon_exact(0, cam), SaturationError);

  CameraModel strict = cam;
  strict.v_floor = 5;
  CHECK_THROWS_AS(pixel_to_radon_exact(4, strict), SaturationError);
  CHECK_NOTHROW(pixel_to_radon_exact(5, strict));
}

TEST_CASE("pixel_to_radon_linear") {
  PreprocessConfig cfg;
  cfg.keep_scale = true;
  CHECK(pixel_to_radon_linear(255, cfg) == 0.0);
  CHECK(pixel_to_radon_linear(0, cfg) == doctest::Approx(2.2));
  CHECK(pixel_to_radon_linear(127, cfg) == doctest::Approx(1.1043137254901961).epsilon(1e-14));
  cfg.keep_scale = false;
  CHECK(pixel_to_radon_linear(127, cfg) == 128.0);
  CHECK(pixel_to_radon_linear(0, cfg) == 255.0);
}

TEST_CASE("camera model validation") {
  CameraModel cam;
  cam.gamma = 0.0;
  CHECK_THROWS_AS(cam.validate(), DomainError);
  cam = {};
  cam.v_floor = 0;
  CHECK_THROWS_AS(cam.validate(), DomainError);
  cam = {};
  cam.i_max = -1;
  CHECK_THROWS_AS(cam.validate(), DomainError);
}

TEST_CASE("round trip through the camera") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> r_dist(0.0, 5.0);
  for (double gamma : {1.0, 2.2, 3.0}) {
    CameraModel cam;
    cam.gamma = gamma;
    cam.i_max = 7.0;
    for (int i = 0; i < 500; ++i) {
      const double r = r_dist(rng);
      const double v = intensity_to_pixel_value(attenuate(cam.i_max, r), cam);
      if (v < cam.v_floor) continue;
      CHECK(std::abs(pixel_to_radon_exact(v, cam) - r) <= 1e-12);
    }
  }
}

TEST_CASE("linearization error bound and monotonicity") {
  PreprocessConfig cfg;
  for (int v = 128; v <= 255; ++v) {
    const double u = 1.0 - v / 255.0;
    const double diff = std::abs(pixel_to_radon_exact(v, cfg.camera) - pixel_to_radon_linear(v, cfg));
    CHECK(diff <= cfg.camera.gamma * u * u);
  }
  for (int v = 2; v <= 255; ++v) {
    CHECK(pixel_to_radon_exact(v, cfg.camera) < pixel_to_radon_exact(v - 1, cfg.camera));
    CHECK(pixel_to_radon_linear(v, cfg) < pixel_to_radon_linear(v - 1, cfg));
  }
}

TEST_CASE("preprocess_image") {
  PreprocessConfig cfg;

  SUBCASE("transparent background maps to zero") {
    const Image out = preprocess_image(Image::raw(4, 5, 255), cfg);
    CHECK(out.mode() == PixelMode::Real);
    for (double v : out.values()) CHECK(v == 0.0);
  }
  SUBCASE("single absorbing pixel, linear mode") {
    Image img = Image::raw(3, 3, 255);
    img.raw_at(1, 2) = 127;
    const Image out = preprocess_image(img, cfg);
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 3; ++c) {
        if (r == 1 && c == 2) CHECK(out.at(r, c) == doctest::Approx(1.1043137254901961));
        else CHECK(out.at(r, c) == 0.0);
      }
    }
  }
  SUBCASE("opaque pixel in exact mode reports its location") {
    Image img = Image::raw(4, 6, 200);
    img.raw_at(2, 5) = 0;
    cfg.mode = PreprocessMode::Exact;
    try {
      preprocess_image(img, cfg);
      FAIL("expected SaturationError");
    } catch (const SaturationError& e) {
      CHECK(e.row() == 2);
      CHECK(e.col() == 5);
      CHECK(e.value() == 0);
    }
  }
  SUBCASE("clamp policy counts clamped pixels") {
    Image img = Image::raw(2, 2, 0);
    img.raw_at(0, 0) = 255;
    cfg.mode = PreprocessMode::Exact;
    cfg.floor_policy = FloorPolicy::Clamp;
    PreprocessReport report;
    const Image out = preprocess_image(img, cfg, &report);
    CHECK(report.clamped_pixels == 3);
    CHECK(out.at(1, 1) == doctest::Approx(-2.2 * std::log(1.0 / 255.0)));
  }
  SUBCASE("real input rejected") {
    CHECK_THROWS_AS(preprocess_image(Image::real(2, 2), cfg), DomainError);
  }
}

TEST_CASE("preprocessing commutes with cropping") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> px(1, 255);
  std::vector<std::uint8_t> data(20 * 30);
  for (auto& v : data) v = static_cast<std::uint8_t>(px(rng));
  const Image img = Image::raw(20, 30, data);
  for (PreprocessMode mode : {PreprocessMode::Exact, PreprocessMode::Linear}) {
    PreprocessConfig cfg;
    cfg.mode = mode;
    const Image a = preprocess_image(img.crop(3, 7, 11, 13), cfg);
    const Image b = preprocess_image(img, cfg).crop(3, 7, 11, 13);
    CHECK(a == b);
  }
}
