#include "smcnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

#include <json.hpp>

#include "smcnet/errors.hpp"
#include "smcnet/trainer.hpp"

namespace smcnet {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// N(0, sd) draw that tolerates sd = 0 while still consuming the stream identically.
double gaussian(std::mt19937_64& rng, double sd) {
  const double z = std::normal_distribution<double>(0.0, 1.0)(rng);
  return sd * z;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ull));
}

constexpr std::uint64_t kSessionStreamBase = 1ull << 40;

void from_json(const nlohmann::json& j, MaterialProfile& p) {
  p.reflection_magnitude = j.value("reflection_magnitude", p.reflection_magnitude);
  p.reflection_phase = j.value("reflection_phase", p.reflection_phase);
  p.penetration_echo_delay_m = j.value("penetration_echo_delay_m", p.penetration_echo_delay_m);
  p.penetration_echo_attenuation = j.value("penetration_echo_attenuation", p.penetration_echo_attenuation);
  p.penetration_echo_phase = j.value("penetration_echo_phase", p.penetration_echo_phase);
  p.roughness_jitter = j.value("roughness_jitter", p.roughness_jitter);
}

}  // namespace

MaterialProfiles builtin_profiles() {
  MaterialProfiles p{};
  //                                   Gamma  theta  delay_m  att   delta  rough
  p[id_of(MaterialClass::Concrete)] = {0.55, 0.4, 0.012, 0.35, 0.2, 0.08};
  p[id_of(MaterialClass::Drywall)] = {0.35, -0.6, 0.020, 0.70, -0.4, 0.05};
  p[id_of(MaterialClass::Glass)] = {0.70, 1.2, 0.006, 0.25, 1.0, 0.02};
  p[id_of(MaterialClass::Metal)] = {0.95, 3.0, 0.0, 0.0, 0.0, 0.01};
  p[id_of(MaterialClass::Wood)] = {0.30, -1.5, 0.025, 0.60, 0.5, 0.06};
  return p;
}

MaterialProfiles load_profiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open material profiles " + path.string());
  MaterialProfiles p = builtin_profiles();
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& [name, value] : j.items()) {
      auto m = material_from_string(name);
      if (!m) throw ConfigError(path.string() + ": unknown material '" + name + "'");
      from_json(value, p[id_of(*m)]);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  for (const auto& prof : p) {
    if (!(prof.reflection_magnitude > 0.0 && prof.reflection_magnitude <= 1.0))
      throw ConfigError(path.string() + ": reflection_magnitude must lie in (0, 1]");
    if (!(prof.penetration_echo_attenuation >= 0.0 && prof.penetration_echo_attenuation < 1.0))
      throw ConfigError(path.string() + ": penetration_echo_attenuation must lie in [0, 1)");
  }
  return p;
}

void SynthConfig::validate() const {
  if (fast_time_len == 0 || rx_count == 0 || tx_count == 0) throw ConfigError("synth dimensions must be >= 1");
  if (!(bandwidth_hz > 0)) throw ConfigError("bandwidth_hz must be > 0");
  if (d0_distances_mm.empty()) throw ConfigError("at least one d0 distance is required");
  if (samples_per_class_distance == 0) throw ConfigError("samples_per_class_distance must be >= 1");
  if (!(split_fraction > 0.0 && split_fraction <= 1.0)) throw ConfigError("split_fraction must lie in (0, 1]");
  if (d0_sessions == 0 || (!d1_distances_mm.empty() && d1_sessions == 0))
    throw ConfigError("session counts must be >= 1");
  const double max_range = fast_time_len * range_resolution(*this);
  std::set<std::uint32_t> d0(d0_distances_mm.begin(), d0_distances_mm.end());
  for (auto d : d0_distances_mm)
    if (d == 0 || d / 1000.0 >= max_range)
      throw ConfigError("distance " + std::to_string(d) + " mm outside the unambiguous range (0, " +
                        std::to_string(max_range) + " m)");
  for (auto d : d1_distances_mm) {
    if (d == 0 || d / 1000.0 >= max_range)
      throw ConfigError("distance " + std::to_string(d) + " mm outside the unambiguous range (0, " +
                        std::to_string(max_range) + " m)");
    if (d0.count(d)) throw ConfigError("d1 distance " + std::to_string(d) + " mm also listed as d0");
  }
}

SynthConfig reference_sensor_config() {
  SynthConfig c;
  c.rx_count = 20;
  c.tx_count = 20;
  c.fast_time_len = 100;
  c.samples_per_class_distance = 80;
  c.d1_samples_per_class_distance = 16;
  return c;
}

double range_resolution(const SynthConfig& cfg) { return kSpeedOfLight / (2.0 * cfg.bandwidth_hz); }

double clutter_phase(std::size_t channel) {
  std::mt19937_64 rng(stream_seed(0xC1077E4ull, channel));
  return std::uniform_real_distribution<double>(0.0, kTwoPi)(rng);
}

double channel_phase(std::size_t channel) {
  std::mt19937_64 rng(stream_seed(0xA77A7ull, channel));
  return std::uniform_real_distribution<double>(0.0, kTwoPi)(rng);
}

std::vector<cdouble> synth_channel(const SynthConfig& cfg, const MaterialProfile& profile, double distance_m,
                                   std::mt19937_64& rng, double clutter_phase_rad, double channel_phase_rad) {
  const std::size_t n = cfg.fast_time_len;
  const double dr = range_resolution(cfg);
  const double k_r = distance_m / dr;
  const double k_e = (distance_m + profile.penetration_echo_delay_m) / dr;
  if (!(distance_m > 0.0) || k_r >= static_cast<double>(n) || k_e >= static_cast<double>(n))
    throw ConfigError("distance " + std::to_string(distance_m) + " m outside the unambiguous range (0, " +
                      std::to_string(n * dr) + " m)");

  const double carrier = std::fmod(4.0 * std::numbers::pi * cfg.center_freq_hz * distance_m / kSpeedOfLight, kTwoPi);
  const double wobble = gaussian(rng, cfg.channel_phase_jitter);
  const double psi = carrier + channel_phase_rad + wobble;
  const double gain = std::max(0.0, 1.0 + gaussian(rng, profile.roughness_jitter));

  const double gamma =
      profile.reflection_magnitude * std::pow(cfg.path_loss_ref_m / distance_m, cfg.path_loss_exponent);
  const cdouble clutter = std::polar(cfg.clutter_amplitude, clutter_phase_rad);
  const cdouble surface = std::polar(gain * gamma, profile.reflection_phase + psi);
  const cdouble echo = std::polar(gain * gamma * profile.penetration_echo_attenuation,
                                  profile.reflection_phase + profile.penetration_echo_phase + psi);

  std::vector<cdouble> x(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double tn = static_cast<double>(t) * inv_n;
    x[t] = clutter * std::polar(1.0, kTwoPi * cfg.clutter_bin * tn) + surface * std::polar(1.0, kTwoPi * k_r * tn) +
           echo * std::polar(1.0, kTwoPi * k_e * tn);
  }
  if (std::isfinite(cfg.snr_db)) {
    const double noise_power = gamma * gamma / std::pow(10.0, cfg.snr_db / 10.0);
    const double sd = std::sqrt(noise_power / 2.0);
    for (auto& v : x) {
      const double re = gaussian(rng, sd);
      const double im = gaussian(rng, sd);
      v += cdouble(re, im);
    }
  }
  return x;
}

DataCube synth_cube(const SynthConfig& cfg, const MaterialProfiles& profiles, MaterialClass label,
                    std::uint32_t distance_mm, std::uint32_t session_id, std::uint32_t sample_id) {
  std::mt19937_64 session_rng(stream_seed(cfg.seed, kSessionStreamBase + session_id));
  const double session_offset_mm = gaussian(session_rng, cfg.session_distance_jitter_mm);
  const double session_phase = gaussian(session_rng, cfg.session_phase_jitter);

  std::mt19937_64 rng(stream_seed(cfg.seed, sample_id));
  const double jitter_mm = gaussian(rng, cfg.distance_jitter_mm);
  const double distance_m = (distance_mm + session_offset_mm + jitter_mm) / 1000.0;

  MaterialProfile prof = profiles[id_of(label)];
  prof.reflection_phase += session_phase;

  DataCube cube;
  cube.rx_count = cfg.rx_count;
  cube.tx_count = cfg.tx_count;
  cube.fast_time_len = cfg.fast_time_len;
  cube.label = label;
  cube.distance_mm = distance_mm;
  cube.session_id = session_id;
  cube.sample_id = sample_id;
  cube.iq.resize(cube.channels() * cfg.fast_time_len);
  for (std::size_t ch = 0; ch < cube.channels(); ++ch) {
    const auto x = synth_channel(cfg, prof, distance_m, rng, clutter_phase(ch), channel_phase(ch));
    auto row = cube.channel(ch);
    for (std::size_t t = 0; t < x.size(); ++t)
      row[t] = {static_cast<float>(x[t].real()), static_cast<float>(x[t].imag())};
  }
  return cube;
}

DatasetManifest generate_dataset(const SynthConfig& cfg, const MaterialProfiles& profiles,
                                 const std::filesystem::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "cubes", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "cubes").string() + ": " + ec.message());

  std::vector<ManifestEntry> entries;
  std::uint32_t sample_id = 0;
  for (int cls = 0; cls < kNumClasses; ++cls) {
    const auto label = static_cast<MaterialClass>(cls);
    auto emit = [&](std::uint32_t distance_mm, std::uint32_t count, std::uint32_t session_base,
                    std::uint32_t sessions, SplitTag tag) {
      for (std::uint32_t i = 0; i < count; ++i, ++sample_id) {
        const std::uint32_t session = session_base + i % sessions;
        const DataCube cube = synth_cube(cfg, profiles, label, distance_mm, session, sample_id);
        char name[96];
        std::snprintf(name, sizeof name, "cubes/%s_%umm_%05u.rdc", std::string(to_string(label)).c_str(),
                      distance_mm, sample_id);
        save_cube(cube, out_dir / name);
        entries.push_back({name, label, distance_mm, session, tag});
      }
    };
    for (auto d : cfg.d0_distances_mm) emit(d, cfg.samples_per_class_distance, 0, cfg.d0_sessions, SplitTag::Train);
    for (auto d : cfg.d1_distances_mm)
      emit(d, cfg.d1_samples_per_class_distance, cfg.d0_sessions, cfg.d1_sessions, SplitTag::TestD1);
  }

  // Tag the held-out share of every d0 cell; order of the manifest stays generation order.
  const SplitResult split = stratified_split(entries, cfg.split_fraction, cfg.seed);
  std::set<std::string> held_out;
  for (const auto& e : split.test_d0) held_out.insert(e.path);
  for (auto& e : entries)
    if (e.split == SplitTag::Train && held_out.count(e.path)) e.split = SplitTag::TestD0;

  write_manifest(entries, out_dir / "manifest.jsonl");
  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  manifest.entries = std::move(entries);
  return manifest;
}

}  // namespace smcnet
