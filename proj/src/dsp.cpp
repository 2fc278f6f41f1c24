#include "smcnet/dsp.hpp"

#include <cmath>
#include <numbers>

#include "smcnet/errors.hpp"

namespace smcnet {

namespace {

// Largest prime handled by the generic O(p^2) butterfly before switching to Bluestein.
constexpr std::size_t kMaxDirectRadix = 31;

std::vector<std::size_t> factorize(std::size_t n) {
  std::vector<std::size_t> f;
  while (n % 4 == 0) {
    f.push_back(4);
    n /= 4;
  }
  while (n % 2 == 0) {
    f.push_back(2);
    n /= 2;
  }
  for (std::size_t p = 3; p * p <= n; p += 2)
    while (n % p == 0) {
      f.push_back(p);
      n /= p;
    }
  if (n > 1) f.push_back(n);
  return f;
}

std::vector<cdouble> unit_roots(std::size_t n) {
  std::vector<cdouble> w(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double a = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    w[j] = {std::cos(a), std::sin(a)};
  }
  return w;
}

}  // namespace

std::string_view to_string(PreprocMode m) { return m == PreprocMode::RawIq ? "raw_iq" : "range_fft"; }

std::optional<PreprocMode> preproc_from_string(std::string_view name) {
  if (name == "raw" || name == "raw_iq" || name == "iq") return PreprocMode::RawIq;
  if (name == "fft" || name == "range_fft") return PreprocMode::RangeFft;
  return std::nullopt;
}

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (n == 0) throw ShapeError("FFT length must be >= 1");
  factors_ = factorize(n);
  if (!factors_.empty() && factors_.back() > kMaxDirectRadix) {
    Bluestein b;
    b.m = 1;
    while (b.m < 2 * n - 1) b.m <<= 1;
    b.chirp.resize(n);
    const std::size_t two_n = 2 * n;
    std::size_t k2 = 0;  // k^2 mod 2n, updated incrementally
    for (std::size_t k = 0; k < n; ++k) {
      if (k > 0) k2 = (k2 + 2 * k - 1) % two_n;
      const double a = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
      b.chirp[k] = {std::cos(a), std::sin(a)};
    }
    b.inner_factors = factorize(b.m);
    b.inner_twiddles = unit_roots(b.m);
    std::vector<cdouble> kernel(b.m, cdouble{});
    kernel[0] = std::conj(b.chirp[0]);
    for (std::size_t k = 1; k < n; ++k) kernel[k] = kernel[b.m - k] = std::conj(b.chirp[k]);
    b.kernel_spectrum.resize(b.m);
    mixed_radix(kernel.data(), 1, b.kernel_spectrum.data(), b.m, b.inner_factors.data(),
                b.inner_twiddles, b.m);
    bluestein_ = std::move(b);
    factors_.clear();
  } else {
    twiddles_ = unit_roots(n);
  }
}

// Decimation in time: the n inputs split into p interleaved subsequences of length n/p whose
// transforms are combined with twiddles W_n^{r*k} and a p-point DFT.
void FftPlan::mixed_radix(const cdouble* in, std::size_t stride, cdouble* out, std::size_t n,
                          const std::size_t* factors, std::span<const cdouble> twiddles,
                          std::size_t root_n) {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  const std::size_t p = factors[0];
  const std::size_t m = n / p;
  for (std::size_t r = 0; r < p; ++r) mixed_radix(in + r * stride, stride * p, out + r * m, m, factors + 1, twiddles, root_n);

  const std::size_t step = root_n / n;   // W_n^j == W_root^{j*step}
  const std::size_t pstep = root_n / p;  // W_p^j == W_root^{j*pstep}
  cdouble scratch[kMaxDirectRadix + 1];
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t r = 0; r < p; ++r) scratch[r] = out[r * m + k] * twiddles[(r * k * step) % root_n];
    if (p == 2) {
      out[k] = scratch[0] + scratch[1];
      out[k + m] = scratch[0] - scratch[1];
    } else if (p == 4) {
      const cdouble a = scratch[0] + scratch[2];
      const cdouble b = scratch[0] - scratch[2];
      const cdouble c = scratch[1] + scratch[3];
      const cdouble d = scratch[1] - scratch[3];
      const cdouble d_rot{d.imag(), -d.real()};  // -i * d
      out[k] = a + c;
      out[k + m] = b + d_rot;
      out[k + 2 * m] = a - c;
      out[k + 3 * m] = b - d_rot;
    } else {
      for (std::size_t q = 0; q < p; ++q) {
        cdouble acc = scratch[0];
        for (std::size_t r = 1; r < p; ++r) acc += scratch[r] * twiddles[((r * q) % p) * pstep];
        out[k + q * m] = acc;
      }
    }
  }
}

void FftPlan::forward(std::span<const cdouble> in, std::span<cdouble> out) const {
  if (in.size() != n_ || out.size() != n_)
    throw ShapeError("FFT plan of length " + std::to_string(n_) + " applied to " +
                     std::to_string(in.size()) + " -> " + std::to_string(out.size()) + " values");
  if (!bluestein_) {
    if (in.data() == out.data()) {
      const std::vector<cdouble> copy(in.begin(), in.end());
      mixed_radix(copy.data(), 1, out.data(), n_, factors_.data(), twiddles_, n_);
    } else {
      mixed_radix(in.data(), 1, out.data(), n_, factors_.data(), twiddles_, n_);
    }
    return;
  }
  const Bluestein& b = *bluestein_;
  std::vector<cdouble> a(b.m, cdouble{});
  for (std::size_t k = 0; k < n_; ++k) a[k] = in[k] * b.chirp[k];
  std::vector<cdouble> spec(b.m);
  mixed_radix(a.data(), 1, spec.data(), b.m, b.inner_factors.data(), b.inner_twiddles, b.m);
  // Inverse transform via conj(FFT(conj(.))) / m.
  for (std::size_t k = 0; k < b.m; ++k) spec[k] = std::conj(spec[k] * b.kernel_spectrum[k]);
  mixed_radix(spec.data(), 1, a.data(), b.m, b.inner_factors.data(), b.inner_twiddles, b.m);
  const double scale = 1.0 / static_cast<double>(b.m);
  for (std::size_t k = 0; k < n_; ++k) out[k] = std::conj(a[k]) * scale * b.chirp[k];
}

std::vector<cdouble> FftPlan::forward(std::span<const cdouble> in) const {
  std::vector<cdouble> out(n_);
  forward(in, out);
  return out;
}

std::vector<cdouble> range_fft_channel(std::span<const cdouble> x) { return FftPlan(x.size()).forward(x); }

std::vector<cdouble> naive_dft(std::span<const cdouble> x) {
  const std::size_t n = x.size();
  std::vector<cdouble> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cdouble acc{};
    for (std::size_t t = 0; t < n; ++t) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += x[t] * cdouble{std::cos(a), std::sin(a)};
    }
    out[k] = acc;
  }
  return out;
}

ComplexMatrix preprocess_cube(const DataCube& cube, PreprocMode mode) {
  cube.validate();
  ComplexMatrix m{cube.channels(), cube.fast_time_len, std::vector<cdouble>(cube.iq.size())};
  for (std::size_t i = 0; i < cube.iq.size(); ++i) m.data[i] = cdouble(cube.iq[i].real(), cube.iq[i].imag());
  if (mode == PreprocMode::RawIq) return m;
  const FftPlan plan(m.cols);
  std::vector<cdouble> tmp(m.cols);
  for (std::size_t r = 0; r < m.rows; ++r) {
    plan.forward(m.row(r), tmp);
    std::copy(tmp.begin(), tmp.end(), m.row(r).begin());
  }
  return m;
}

}  // namespace smcnet
