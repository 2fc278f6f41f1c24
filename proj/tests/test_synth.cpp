#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>

#include "smcnet/dsp.hpp"
#include "smcnet/errors.hpp"
#include "smcnet/synth.hpp"
#include "support.hpp"

using namespace smcnet;
using testing::TempDir;

namespace {

SynthConfig quiet_config() {
  SynthConfig c;
  c.snr_db = SynthConfig::kNoNoise;
  c.clutter_amplitude = 0.0;
  c.channel_phase_jitter = 0.0;
  return c;
}

MaterialProfile bare_profile() {
  MaterialProfile p;
  p.reflection_magnitude = 0.8;
  return p;
}

std::size_t peak_bin(const std::vector<cdouble>& spec) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < spec.size(); ++k)
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  return best;
}

// Width in DFT bins of the region around the peak that stays within 3 dB, on a 16x zero-padded grid.
double minus3db_width(const std::vector<cdouble>& x) {
  const std::size_t pad = 16, m = x.size() * pad;
  std::vector<cdouble> z(m);
  std::copy(x.begin(), x.end(), z.begin());
  const auto spec = FftPlan(m).forward(z);
  const std::size_t p = peak_bin(spec);
  const double half = std::norm(spec[p]) / 2.0;
  std::size_t lo = p, hi = p;
  while (lo > 0 && std::norm(spec[lo - 1]) >= half) --lo;
  while (hi + 1 < m && std::norm(spec[hi + 1]) >= half) ++hi;
  return static_cast<double>(hi - lo + 1) / pad;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

SynthConfig small_dataset_config() {
  SynthConfig c;
  c.rx_count = 2;
  c.tx_count = 2;
  c.fast_time_len = 64;
  c.samples_per_class_distance = 10;
  c.d1_samples_per_class_distance = 4;
  c.seed = 11;
  return c;
}

}  // namespace

TEST_CASE("range resolution") {
  SynthConfig c;
  CHECK(range_resolution(c) == doctest::Approx(0.0299792458).epsilon(1e-12));
  c.bandwidth_hz = 2.5e9;
  CHECK(range_resolution(c) == doctest::Approx(0.0599584916).epsilon(1e-12));
  for (double k : {0.5, 3.0, 7.25}) {
    c.bandwidth_hz = 5e9 * k;
    CHECK(range_resolution(c) == doctest::Approx(0.0299792458 / k).epsilon(1e-12));
  }
}

TEST_CASE("the surface return peaks at the expected range bin") {
  const SynthConfig cfg = quiet_config();
  std::mt19937_64 rng(1);
  CHECK(peak_bin(range_fft_channel(synth_channel(cfg, bare_profile(), 0.60, rng))) == 20);
  for (int mm = 100; mm < 1850; mm += 50) {
    const double d = mm / 1000.0;
    const auto expect = static_cast<std::size_t>(std::lround(d / range_resolution(cfg)));
    CAPTURE(mm);
    CHECK(peak_bin(range_fft_channel(synth_channel(cfg, bare_profile(), d, rng))) == expect);
  }
}

TEST_CASE("a zero reflection leaves only the clutter tone") {
  SynthConfig cfg;
  cfg.clutter_amplitude = 1.5;
  MaterialProfile p = builtin_profiles()[id_of(MaterialClass::Glass)];
  p.reflection_magnitude = 0.0;
  std::mt19937_64 rng(2);
  const double phi = clutter_phase(7);
  const auto x = synth_channel(cfg, p, 0.5, rng, phi, channel_phase(7));
  for (std::size_t t = 0; t < x.size(); ++t) {
    const cdouble expect = std::polar(1.5, phi + 2 * std::numbers::pi * cfg.clutter_bin * t / x.size());
    CHECK(std::abs(x[t] - expect) < 1e-12);
  }
}

TEST_CASE("a penetration echo widens the range peak") {
  const SynthConfig cfg = quiet_config();
  const auto profiles = builtin_profiles();
  std::mt19937_64 rng(3);
  const double metal = minus3db_width(synth_channel(cfg, profiles[id_of(MaterialClass::Metal)], 0.7, rng));
  const double drywall = minus3db_width(synth_channel(cfg, profiles[id_of(MaterialClass::Drywall)], 0.7, rng));
  CHECK(drywall > metal);
}

TEST_CASE("noise power matches the configured SNR") {
  SynthConfig noisy = quiet_config();
  noisy.snr_db = 20.0;
  const SynthConfig clean = quiet_config();
  const MaterialProfile p = builtin_profiles()[id_of(MaterialClass::Metal)];
  double noise = 0;
  std::size_t count = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    std::mt19937_64 a(s), b(s);
    const auto x = synth_channel(noisy, p, 0.8, a);
    const auto y = synth_channel(clean, p, 0.8, b);
    for (std::size_t t = 0; t < x.size(); ++t, ++count) noise += std::norm(x[t] - y[t]);
  }
  noise /= static_cast<double>(count);
  const double gamma = p.reflection_magnitude / 0.8;  // path loss with exponent 1 at 0.8 m
  const double snr = 10 * std::log10(gamma * gamma / noise);
  CHECK(std::abs(snr - 20.0) < 1.0);
}

TEST_CASE("out-of-range distances are rejected") {
  const SynthConfig cfg = quiet_config();
  std::mt19937_64 rng(4);
  CHECK_THROWS_AS(synth_channel(cfg, bare_profile(), 0.0, rng), ConfigError);
  CHECK_THROWS_AS(synth_channel(cfg, bare_profile(), 64 * range_resolution(cfg), rng), ConfigError);
}

TEST_CASE("config validation") {
  SynthConfig c;
  CHECK_NOTHROW(c.validate());
  SUBCASE("overlapping distance sets") {
    c.d1_distances_mm = {700};
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  SUBCASE("distance past the unambiguous range") {
    c.d0_distances_mm = {2500};
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  SUBCASE("empty dimensions") {
    c.rx_count = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  SUBCASE("split fraction") {
    c.split_fraction = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  SUBCASE("reference sensor layout") {
    const auto r = reference_sensor_config();
    CHECK(r.rx_count == 20);
    CHECK(r.fast_time_len == 100);
    CHECK_NOTHROW(r.validate());
  }
}

TEST_CASE("material profiles") {
  const auto p = builtin_profiles();
  for (int a = 0; a < kNumClasses; ++a)
    for (int b = a + 1; b < kNumClasses; ++b) CHECK_FALSE(p[a] == p[b]);
  CHECK(load_profiles(SMCNET_SOURCE_DIR "/data/materials.json") == p);

  TempDir dir("profiles");
  auto write = [&](const std::string& text) {
    std::ofstream(dir / "m.json") << text;
    return dir / "m.json";
  };
  SUBCASE("partial file keeps the other built-ins") {
    const auto q = load_profiles(write(R"({"wood": {"reflection_magnitude": 0.4}})"));
    CHECK(q[id_of(MaterialClass::Wood)].reflection_magnitude == 0.4);
    CHECK(q[id_of(MaterialClass::Wood)].reflection_phase == p[id_of(MaterialClass::Wood)].reflection_phase);
    CHECK(q[id_of(MaterialClass::Metal)] == p[id_of(MaterialClass::Metal)]);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(load_profiles(write(R"({"plastic": {}})")), ConfigError);
    CHECK_THROWS_AS(load_profiles(write(R"({"glass": {"reflection_magnitude": 1.5}})")), ConfigError);
    CHECK_THROWS_AS(load_profiles(write("{not json")), ConfigError);
    CHECK_THROWS_AS(load_profiles(dir / "absent.json"), IoError);
  }
}

TEST_CASE("cubes are a pure function of the seed") {
  SynthConfig c = small_dataset_config();
  const auto p = builtin_profiles();
  CHECK(synth_cube(c, p, MaterialClass::Wood, 700, 2, 5) == synth_cube(c, p, MaterialClass::Wood, 700, 2, 5));
  CHECK_FALSE(synth_cube(c, p, MaterialClass::Wood, 700, 2, 5).iq == synth_cube(c, p, MaterialClass::Wood, 700, 2, 6).iq);
  c.seed = 12;
  CHECK_FALSE(synth_cube(c, p, MaterialClass::Wood, 700, 2, 5).iq ==
              synth_cube(small_dataset_config(), p, MaterialClass::Wood, 700, 2, 5).iq);
}

TEST_CASE("dataset generation") {
  const SynthConfig cfg = small_dataset_config();
  TempDir a("gen_a"), b("gen_b");
  const auto m = generate_dataset(cfg, builtin_profiles(), a.path());
  generate_dataset(cfg, builtin_profiles(), b.path());

  CHECK(m.entries.size() == 5 * (3 * 10 + 2 * 4));
  CHECK(slurp(a / "manifest.jsonl") == slurp(b / "manifest.jsonl"));
  for (const auto& e : m.entries) REQUIRE(slurp(a.path() / e.path) == slurp(b.path() / e.path));

  std::map<std::pair<int, std::uint32_t>, std::map<SplitTag, int>> cells;
  for (const auto& e : m.entries) {
    ++cells[{static_cast<int>(e.label), e.distance_mm}][e.split];
    const auto cube = load_cube(m.resolve(e));
    CHECK(cube.label == e.label);
    CHECK(cube.distance_mm == e.distance_mm);
    CHECK(cube.session_id == e.session_id);
  }
  for (const auto& [cell, tags] : cells) {
    if (cell.second == 600 || cell.second == 800) {
      CHECK(tags.at(SplitTag::TestD1) == 4);
    } else {
      CHECK(tags.at(SplitTag::Train) == 8);
      CHECK(tags.at(SplitTag::TestD0) == 2);
    }
  }
  CHECK(load_manifest(a / "manifest.jsonl").entries == m.entries);
}

TEST_CASE("corpus sizes") {
  SUBCASE("four samples per d0 cell, no d1") {
    SynthConfig c = small_dataset_config();
    c.samples_per_class_distance = 4;
    c.d1_distances_mm.clear();
    TempDir dir("gen_small");
    const auto m = generate_dataset(c, builtin_profiles(), dir.path());
    CHECK(m.entries.size() == 60);
    CHECK(load_manifest(dir / "manifest.jsonl").entries.size() == 60);
  }
  SUBCASE("reference layout gives 1200 d0 and 160 d1 captures") {
    const auto r = reference_sensor_config();
    CHECK(kNumClasses * r.d0_distances_mm.size() * r.samples_per_class_distance == 1200);
    CHECK(kNumClasses * r.d1_distances_mm.size() * r.d1_samples_per_class_distance == 160);
  }
}

TEST_CASE("nearest-centroid classification beats chance") {
  SynthConfig cfg = small_dataset_config();
  cfg.rx_count = 4;
  cfg.tx_count = 4;
  const auto p = builtin_profiles();
  auto features = [&](MaterialClass label, std::uint32_t id) {
    const auto cube = synth_cube(cfg, p, label, 700, id % 12, id);
    const auto spec = preprocess_cube(cube, PreprocMode::RangeFft);
    std::vector<double> f(spec.cols, 0.0);
    for (std::size_t r = 0; r < spec.rows; ++r)
      for (std::size_t k = 0; k < spec.cols; ++k) f[k] += std::abs(spec.data[r * spec.cols + k]);
    return f;
  };
  std::array<std::vector<double>, kNumClasses> centroid;
  std::uint32_t id = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    centroid[c].assign(cfg.fast_time_len, 0.0);
    for (int i = 0; i < 20; ++i, ++id) {
      const auto f = features(static_cast<MaterialClass>(c), id);
      for (std::size_t k = 0; k < f.size(); ++k) centroid[c][k] += f[k] / 20;
    }
  }
  int correct = 0, total = 0;
  for (int c = 0; c < kNumClasses; ++c)
    for (int i = 0; i < 10; ++i, ++id, ++total) {
      const auto f = features(static_cast<MaterialClass>(c), id);
      int best = 0;
      double best_d = 1e300;
      for (int k = 0; k < kNumClasses; ++k) {
        double d = 0;
        for (std::size_t j = 0; j < f.size(); ++j) d += std::pow(f[j] - centroid[k][j], 2);
        if (d < best_d) best_d = d, best = k;
      }
      correct += best == c;
    }
  CHECK(100.0 * correct / total > 20.0);
}
