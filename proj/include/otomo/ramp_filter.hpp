#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace otomo::recon {

enum class FilterKind { RamLak, SheppLogan, Hann, Hamming };

struct FilterSpec {
  FilterKind kind = FilterKind::RamLak;
  // Fraction of Nyquist above which the response is zero.
  double cutoff = 1.0;

  void validate() const;
};

FilterKind parse_filter_kind(std::string_view name);
std::string_view to_string(FilterKind kind);

// Padded FFT length for n detector samples: max(64, 2^ceil(log2(2n))).
std::size_t padded_length(std::size_t n);

// Frequency response on bins k = 0..M/2 of the padded length M. Built from
// the band-limited spatial ramp kernel (h(0) = 1/4, h(m) = -1/(pi m)^2 for
// odd m) so the DC term is not lost; approximately |k|/M, then windowed.
std::vector<double> filter_response(std::size_t padded, const FilterSpec& spec);

// Ramp-filters projections of a fixed length. Owns its FFTW plan and
// buffers, so use one instance per worker thread.
class RampFilter {
 public:
  RampFilter(std::size_t n_detectors, const FilterSpec& spec);
  ~RampFilter();
  RampFilter(const RampFilter&) = delete;
  RampFilter& operator=(const RampFilter&) = delete;

  std::size_t size() const { return n_; }

  // out[i] = (p * h)[i] in detector-sample units; in and out may alias.
  void apply(std::span<const double> projection, std::span<double> out);

 private:
  struct Plan;
  std::size_t n_;
  std::size_t padded_;
  std::vector<double> response_;
  std::unique_ptr<Plan> plan_;
};

}  // namespace otomo::recon
