#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "smcnet/datacube.hpp"

namespace smcnet {

using cdouble = std::complex<double>;

enum class PreprocMode { RawIq, RangeFft };

std::string_view to_string(PreprocMode m);
/// Accepts "raw", "raw_iq", "iq", "fft", "range_fft".
std::optional<PreprocMode> preproc_from_string(std::string_view name);

/// Unnormalized forward DFT of any length N >= 1.
///
/// Lengths whose prime factors are all small go through a recursive mixed-radix
/// decimation in time; lengths with a large prime factor use Bluestein's chirp-z
/// algorithm over a power-of-two convolution. No zero padding of the output ever occurs.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const { return n_; }
  const std::vector<std::size_t>& factors() const { return factors_; }
  bool uses_bluestein() const { return bluestein_.has_value(); }

  void forward(std::span<const cdouble> in, std::span<cdouble> out) const;
  std::vector<cdouble> forward(std::span<const cdouble> in) const;

 private:
  struct Bluestein {
    std::size_t m = 0;
    std::vector<cdouble> chirp;           // exp(-i*pi*k^2/n), k < n
    std::vector<cdouble> kernel_spectrum;  // FFT_m of conj(chirp) wrapped
    std::vector<std::size_t> inner_factors;
    std::vector<cdouble> inner_twiddles;
  };

  static void mixed_radix(const cdouble* in, std::size_t stride, cdouble* out, std::size_t n,
                          const std::size_t* factors, std::span<const cdouble> twiddles,
                          std::size_t root_n);

  std::size_t n_;
  std::vector<std::size_t> factors_;
  std::vector<cdouble> twiddles_;  // exp(-2*pi*i*j/n)
  std::optional<Bluestein> bluestein_;
};

/// X[k] = sum_n x[n] exp(-2*pi*i*k*n/N) by the FFT.
std::vector<cdouble> range_fft_channel(std::span<const cdouble> x);
/// Direct O(N^2) evaluation of the same sum. Reference oracle only.
std::vector<cdouble> naive_dft(std::span<const cdouble> x);

/// Dense complex matrix, row-major.
struct ComplexMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<cdouble> data;

  std::span<const cdouble> row(std::size_t r) const { return std::span(data).subspan(r * cols, cols); }
  std::span<cdouble> row(std::size_t r) { return std::span(data).subspan(r * cols, cols); }
};

/// raw_iq passes the reshaped IQ matrix through; range_fft transforms every channel row.
ComplexMatrix preprocess_cube(const DataCube& cube, PreprocMode mode);

}  // namespace smcnet
