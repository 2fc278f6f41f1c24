#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "smcnet/datacube.hpp"
#include "smcnet/tensor.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("smcnet_" + tag + "_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  fs::path path_;
};

inline smcnet::DataCube random_cube(std::mt19937_64& rng, std::uint32_t rx, std::uint32_t tx, std::uint32_t n,
                                    smcnet::MaterialClass label = smcnet::MaterialClass::Glass,
                                    std::uint32_t distance_mm = 500) {
  std::normal_distribution<float> nd;
  smcnet::DataCube c;
  c.rx_count = rx;
  c.tx_count = tx;
  c.fast_time_len = n;
  c.iq.resize(static_cast<std::size_t>(rx) * tx * n);
  for (auto& z : c.iq) z = {nd(rng), nd(rng)};
  c.label = label;
  c.distance_mm = distance_mm;
  c.session_id = static_cast<std::uint32_t>(rng() % 15);
  c.sample_id = static_cast<std::uint32_t>(rng() % 100000);
  return c;
}

template <class T>
smcnet::CTensor<T> random_ctensor(std::mt19937_64& rng, smcnet::Shape shape) {
  std::normal_distribution<double> nd;
  smcnet::CTensor<T> t(std::move(shape));
  for (auto& z : t.data) z = {static_cast<T>(nd(rng)), static_cast<T>(nd(rng))};
  return t;
}

/// X[k] = sum x[n] exp(-2 pi i k n / N), accumulated in long double.
inline std::vector<std::complex<double>> dft_long_double(const std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  const long double pi = 3.141592653589793238462643383279502884L;
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    long double re = 0, im = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const long double a = -2.0L * pi * static_cast<long double>((k * t) % n) / static_cast<long double>(n);
      re += x[t].real() * std::cos(a) - x[t].imag() * std::sin(a);
      im += x[t].real() * std::sin(a) + x[t].imag() * std::cos(a);
    }
    out[k] = {static_cast<double>(re), static_cast<double>(im)};
  }
  return out;
}

template <class V>
double max_rel_diff(const V& a, const V& b) {
  double diff = 0, scale = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, static_cast<double>(std::abs(a[i] - b[i])));
    scale = std::max(scale, static_cast<double>(std::abs(b[i])));
  }
  return scale == 0 ? diff : diff / scale;
}

}  // namespace testing
