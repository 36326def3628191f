#include "otomo/ramp_filter.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include <fftw3.h>
#include <fmt/format.h>

#include "otomo/core.hpp"

namespace otomo::recon {
namespace {

// FFTW planning is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

void FilterSpec::validate() const {
  if (!(cutoff > 0.0 && cutoff <= 1.0)) {
    throw DomainError(fmt::format("filter cutoff must lie in (0, 1], got {}", cutoff));
  }
}

FilterKind parse_filter_kind(std::string_view name) {
  if (name == "ram-lak") return FilterKind::RamLak;
  if (name == "shepp-logan") return FilterKind::SheppLogan;
  if (name == "hann") return FilterKind::Hann;
  if (name == "hamming") return FilterKind::Hamming;
  throw ParseError(fmt::format("unknown filter '{}'", name));
}

std::string_view to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::RamLak: return "ram-lak";
    case FilterKind::SheppLogan: return "shepp-logan";
    case FilterKind::Hann: return "hann";
    case FilterKind::Hamming: return "hamming";
  }
  return "?";
}

std::size_t padded_length(std::size_t n) {
  std::size_t m = 1;
  while (m < 2 * n) m <<= 1;
  return std::max<std::size_t>(64, m);
}

std::vector<double> filter_response(std::size_t padded, const FilterSpec& spec) {
  spec.validate();
  // Spatial kernel sampled on the circular grid, transformed directly. The
  // kernel is real and even, so only cosine terms survive.
  std::vector<double> kernel(padded, 0.0);
  kernel[0] = 0.25;
  for (std::size_t m = 1; m <= padded / 2; ++m) {
    if (m % 2 == 1) {
      const double v = -1.0 / (kPi * kPi * static_cast<double>(m * m));
      kernel[m] = v;
      kernel[padded - m] = v;
    }
  }

  std::vector<double> response(padded / 2 + 1);
  {
    std::vector<double> in(kernel);
    std::vector<fftw_complex> out(padded / 2 + 1);
    fftw_plan plan;
    {
      std::lock_guard lock(planner_mutex());
      plan = fftw_plan_dft_r2c_1d(static_cast<int>(padded), in.data(), out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    for (std::size_t k = 0; k < response.size(); ++k) response[k] = out[k][0];
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }

  for (std::size_t k = 0; k < response.size(); ++k) {
    // Frequency as a fraction of the cutoff frequency.
    const double u = 2.0 * static_cast<double>(k) / static_cast<double>(padded) / spec.cutoff;
    double window = 1.0;
    if (u > 1.0) {
      window = 0.0;
    } else {
      switch (spec.kind) {
        case FilterKind::RamLak: break;
        case FilterKind::SheppLogan:
          window = u == 0.0 ? 1.0 : std::sin(0.5 * kPi * u) / (0.5 * kPi * u);
          break;
        case FilterKind::Hann: window = 0.5 + 0.5 * std::cos(kPi * u); break;
        case FilterKind::Hamming: window = 0.54 + 0.46 * std::cos(kPi * u); break;
      }
    }
    response[k] *= window;
  }
  return response;
}

struct RampFilter::Plan {
  double* real = nullptr;
  fftw_complex* spectrum = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

RampFilter::RampFilter(std::size_t n_detectors, const FilterSpec& spec)
    : n_(n_detectors),
      padded_(padded_length(n_detectors)),
      response_(filter_response(padded_, spec)),
      plan_(std::make_unique<Plan>()) {
  const std::size_t bins = padded_ / 2 + 1;
  // fftw_malloc keeps buffer alignment, and with it the chosen plan, fixed.
  plan_->real = static_cast<double*>(fftw_malloc(sizeof(double) * padded_));
  plan_->spectrum = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins));
  std::lock_guard lock(planner_mutex());
  plan_->forward = fftw_plan_dft_r2c_1d(static_cast<int>(padded_), plan_->real, plan_->spectrum,
                                        FFTW_ESTIMATE);
  plan_->backward = fftw_plan_dft_c2r_1d(static_cast<int>(padded_), plan_->spectrum, plan_->real,
                                         FFTW_ESTIMATE);
}

RampFilter::~RampFilter() {
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_->forward);
    fftw_destroy_plan(plan_->backward);
  }
  fftw_free(plan_->real);
  fftw_free(plan_->spectrum);
}

void RampFilter::apply(std::span<const double> projection, std::span<double> out) {
  if (projection.size() != n_ || out.size() != n_) {
    throw ShapeError(fmt::format("ramp filter built for {} samples, got {}", n_, projection.size()));
  }
  std::copy(projection.begin(), projection.end(), plan_->real);
  std::fill(plan_->real + n_, plan_->real + padded_, 0.0);
  fftw_execute(plan_->forward);
  const std::size_t bins = padded_ / 2 + 1;
  for (std::size_t k = 0; k < bins; ++k) {
    plan_->spectrum[k][0] *= response_[k];
    plan_->spectrum[k][1] *= response_[k];
  }
  fftw_execute(plan_->backward);
  const double norm = 1.0 / static_cast<double>(padded_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = plan_->real[i] * norm;
}

}  // namespace otomo::recon
